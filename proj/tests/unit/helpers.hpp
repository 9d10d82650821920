#pragma once

#include <functional>

#include <doctest.h>

#include "attnreg/error.hpp"

// Runs `f` and returns the kind of the attnreg::Error it throws.
inline attnreg::ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const attnreg::Error& e) {
    return e.kind();
  }
  FAIL("expected an attnreg::Error");
  return attnreg::ErrorKind::IoError;
}
