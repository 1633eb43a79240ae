// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

namespace mssf::log {

enum class Level { debug, info, warn, error, quiet };

/// Messages below the threshold are dropped. Default: info.
void set_level(Level level);
Level level();

void info(const std::string& message);
void warn(const std::string& message);
void error(const std::string& message);

}  // namespace mssf::log
