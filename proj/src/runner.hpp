#pragma once

#include <string>

namespace fcl {

// High-level pipeline commands. Each takes a JSON config (see README for the
// schemas), writes its outputs plus an outputs.json listing under the
// config's "out" directory, and throws std::invalid_argument for validation
// problems or fcl::io_error for file problems.
void run_gen(const std::string& config_json);
void run_train(const std::string& config_json);
void run_eval(const std::string& config_json);
void run_audit(const std::string& config_json);
void run_dump_embeddings(const std::string& config_json);

}  // namespace fcl
