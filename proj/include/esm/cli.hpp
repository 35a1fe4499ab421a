#pragma once

#include <string>
#include <vector>

namespace esm {

// Worker-count request: positive flag wins, then a positive ESM_THREADS env
// value, else 0 (resolved to the hardware count downstream).
int resolve_thread_request(int flag_value);

// Each command prints errors to stderr and returns the process exit code:
// 0 success, 1 runtime failure, 2 usage/validation.
int cmd_simulate(const std::string& config_path, const std::string& out_dir,
                 const std::vector<std::string>& overrides, int threads);

int cmd_fit(const std::string& config_path, const std::string& data_csv,
            const std::string& model_out,
            const std::vector<std::string>& overrides, bool coerce,
            int threads);

int cmd_predict(const std::string& model_path, const std::string& data_csv,
                double alpha, const std::string& out_csv);

}  // namespace esm
