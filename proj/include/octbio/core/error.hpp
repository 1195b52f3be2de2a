#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace octbio {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke a documented precondition (shape, range, divisibility...).
class ContractError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& where, std::size_t line, const std::string& what)
      : Error(where + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  ValidationError(const std::string& what, std::vector<std::string> details)
      : Error(compose(what, details)), details_(std::move(details)) {}
  const std::vector<std::string>& details() const { return details_; }

 private:
  static std::string compose(const std::string& what, const std::vector<std::string>& details) {
    std::string s = what;
    for (const auto& d : details) s += "\n  " + d;
    return s;
  }
  std::vector<std::string> details_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace octbio
