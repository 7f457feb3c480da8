#pragma once

#include <stdexcept>
#include <string>

namespace reca {

// All recoverable failures are thrown as Error and mapped to negative status
// codes at the C boundary.  `kind` is stable; `what()` carries the detail
// (shape mismatches name both shapes, file errors name the path, ...).
struct Error : std::runtime_error {
    enum class Kind {
        invalid_arg,  // bad argument / shape mismatch
        config,       // inconsistent experiment configuration
        io,           // file or format problem
        state,        // operation not valid in the current state
        training,     // a training run failed to reach its target
        undecodable,  // an image that is not an exact rendering of a scene
    };

    Kind kind;
    Error(Kind k, std::string msg) : std::runtime_error(std::move(msg)), kind(k) {}
};

[[noreturn]] inline void fail(Error::Kind k, std::string msg) {
    throw Error(k, std::move(msg));
}

} // namespace reca
