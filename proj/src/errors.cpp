#include "deepbasket/errors.hpp"

namespace deepbasket {

FormatError::FormatError(const std::string& what, std::uint64_t byte_offset)
    : Error(what + " (at byte offset " + std::to_string(byte_offset) + ")"), byte_offset_(byte_offset) {}

ExitCode exit_code(const std::exception& e) noexcept {
    if (dynamic_cast<const ConfigError*>(&e) != nullptr ||
        dynamic_cast<const ValidationError*>(&e) != nullptr) {
        return ExitCode::Config;
    }
    if (dynamic_cast<const FormatError*>(&e) != nullptr) return ExitCode::DataFormat;
    if (dynamic_cast<const NumericalError*>(&e) != nullptr) return ExitCode::Numerical;
    return ExitCode::Failure;
}

}  // namespace deepbasket
