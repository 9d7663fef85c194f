// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef DDBM_LOG_H_
#define DDBM_LOG_H_

#include <string>

namespace ddbm {

enum class LogLevel { kDebug = 0, kInfo, kWarning, kError, kOff };

void SetLogLevel(LogLevel level);
LogLevel GetLogLevel();

// Thread-safe line logging to stderr.
void Log(LogLevel level, const std::string& message);
inline void LogInfo(const std::string& m) { Log(LogLevel::kInfo, m); }
inline void LogWarning(const std::string& m) { Log(LogLevel::kWarning, m); }

}  // namespace ddbm

#endif  // DDBM_LOG_H_
