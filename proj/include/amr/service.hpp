#pragma once

// HTTP API over read-only artifacts:
//   GET  /health   -> {"status":"ok","version":...}
//   GET  /report   -> EvalReport JSON
//   GET  /regional -> regional tables
//   POST /query    -> GroundedAnswer JSON for {"question": "..."}
// Errors use {"error": {"code": ..., "message": ...}}.

#include <atomic>
#include <memory>
#include <optional>
#include <string>

#include "amr/pipeline.hpp"

namespace httplib {
class Server;
}

namespace amr {

inline constexpr std::string_view kVersion = "0.1.0";

class Service {
 public:
  /// Loads whatever artifacts exist; missing ones make the dependent routes answer 409.
  /// A null `generator` means the one configured in `config` (if any).
  explicit Service(RunConfig config, std::unique_ptr<TextGenerator> generator = nullptr);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  bool report_loaded() const noexcept { return report_.has_value(); }
  bool index_loaded() const noexcept { return index_ != nullptr; }

  /// Binds and serves until stop(). Returns false when binding fails.
  bool listen(const std::string& host, int port);
  /// Binds to an ephemeral port and returns it, or -1.
  int bind_any_port(const std::string& host);
  /// Serves on a socket bound by bind_any_port; blocks until stop().
  bool listen_after_bind();
  void stop();
  bool running() const;

 private:
  void install_routes();

  RunConfig config_;
  std::unique_ptr<Embedder> embedder_;
  std::unique_ptr<TextGenerator> generator_;
  std::optional<EvalReport> report_;
  std::string report_body_;
  std::string regional_body_;
  std::shared_ptr<const VectorIndex> index_;
  std::unique_ptr<httplib::Server> server_;
  std::atomic<std::uint64_t> next_request_{1};
};

}  // namespace amr
