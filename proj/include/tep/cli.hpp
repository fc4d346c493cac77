#pragma once

#include <ostream>
#include <string>

#include "tep/checks.hpp"
#include "tep/config.hpp"

namespace tep::cli {

enum ExitCode : int { kOk = 0, kCheckFailed = 1, kUsage = 2, kRuntime = 3 };

// Each command reads its keys from cfg, writes outputs plus the resolved
// config (<command>.cfg) under cfg["out"], and logs progress to log.
int cmd_verify(config::RunConfig& cfg, std::ostream& log,
               const checks::IdentityHooks& hooks = checks::default_hooks());
int cmd_train(config::RunConfig& cfg, std::ostream& log);
int cmd_sweep(config::RunConfig& cfg, std::ostream& log);
int cmd_diagnose(config::RunConfig& cfg, std::ostream& log);

/// Dispatches by name and maps exceptions to exit codes: input and config
/// errors give kUsage, everything else kRuntime.
int run_command(const std::string& name, config::RunConfig& cfg, std::ostream& log,
                const checks::IdentityHooks& hooks = checks::default_hooks());

}  // namespace tep::cli
