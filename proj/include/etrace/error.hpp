#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace etrace {

/// Base of every error raised by the toolkit.
class error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class io_error : public error {
  public:
    using error::error;
};

/// Malformed input. `line()` is 1-based, 0 when no line applies.
class parse_error : public error {
  public:
    parse_error(const std::string &msg, std::size_t line) :
        error{ line ? "line " + std::to_string(line) + ": " + msg : msg },
        line_{ line } {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

/// Well-formed input that violates a data-model invariant.
class validation_error : public parse_error {
  public:
    using parse_error::parse_error;
};

class domain_error : public error {
  public:
    using error::error;
};

class insufficient_data_error : public error {
  public:
    using error::error;
};

class config_error : public error {
  public:
    using error::error;
};

/// A requested capability (vendor library, device) is not present on this host.
class capability_error : public error {
  public:
    using error::error;
};

/// A backend query failed; carries the vendor status code when one exists.
class backend_error : public error {
  public:
    backend_error(const std::string &msg, int vendor_code = 0) :
        error{ msg + " (vendor code " + std::to_string(vendor_code) + ")" },
        vendor_code_{ vendor_code } {}

    [[nodiscard]] int vendor_code() const noexcept { return vendor_code_; }

  private:
    int vendor_code_;
};

/// A replay backend ran past the last recorded sample.
class end_of_stream : public error {
  public:
    end_of_stream() :
        error{ "replay stream exhausted" } {}
};

class launch_error : public error {
  public:
    using error::error;
};

}  // namespace etrace
