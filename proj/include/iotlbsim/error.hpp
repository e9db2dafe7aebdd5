// Copyright 2026 The iotlbsim Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace iotlbsim {

enum class Errc {
  InvalidConfig,
  UnknownDevice,
  CalibrationError,
  ProgramTooLong,
  MissingOperand,
  EmptyInput,
  LengthMismatch,
  ChannelSetupError,
  FlushUnavailable,
  ConfigSyntax,
  ConfigUnknownKey,
  ConfigConstraint,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::UnknownDevice: return "UnknownDevice";
    case Errc::CalibrationError: return "CalibrationError";
    case Errc::ProgramTooLong: return "ProgramTooLong";
    case Errc::MissingOperand: return "MissingOperand";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::ChannelSetupError: return "ChannelSetupError";
    case Errc::FlushUnavailable: return "FlushUnavailable";
    case Errc::ConfigSyntax: return "ConfigSyntax";
    case Errc::ConfigUnknownKey: return "ConfigUnknownKey";
    case Errc::ConfigConstraint: return "ConfigConstraint";
  }
  return "Unknown";
}

/// Every failure raised by the simulator carries one of the codes above so
/// callers (and tests) can branch on the kind rather than on message text.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace iotlbsim
