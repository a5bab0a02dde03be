#pragma once

#include <stdexcept>
#include <string>

namespace annulus {

enum class ErrorKind {
  Domain,      // argument outside an operation's precondition
  Structure,   // nonlinearity does not have the required sign structure
  Bracket,     // a root or separatrix bracket could not be established
  Resolution,  // sampling grid too coarse
  State,       // object is in the wrong regime for the operation
  Data,        // input data violates an expected shape
  Window,      // evaluation window touches a singular point
  Internal,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Domain: return "DomainError";
    case ErrorKind::Structure: return "StructureError";
    case ErrorKind::Bracket: return "BracketError";
    case ErrorKind::Resolution: return "ResolutionError";
    case ErrorKind::State: return "StateError";
    case ErrorKind::Data: return "DataError";
    case ErrorKind::Window: return "WindowError";
    case ErrorKind::Internal: return "InternalError";
  }
  return "InternalError";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }
  const char* name() const noexcept { return to_string(kind_); }

 private:
  ErrorKind kind_;
};

#define ANNULUS_DEFINE_ERROR(Type, Kind)                              \
  struct Type : Error {                                               \
    explicit Type(const std::string& what) : Error(ErrorKind::Kind, what) {} \
  };

ANNULUS_DEFINE_ERROR(DomainError, Domain)
ANNULUS_DEFINE_ERROR(StructureError, Structure)
ANNULUS_DEFINE_ERROR(BracketError, Bracket)
ANNULUS_DEFINE_ERROR(ResolutionError, Resolution)
ANNULUS_DEFINE_ERROR(StateError, State)
ANNULUS_DEFINE_ERROR(DataError, Data)
ANNULUS_DEFINE_ERROR(WindowError, Window)

#undef ANNULUS_DEFINE_ERROR

}  // namespace annulus
