#pragma once

#include <stdexcept>
#include <string>

namespace vqad {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A query coordinate fell outside the level-0 occupied region.
class OutsideDomain : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent input data (bitstreams, configs, images).
class FormatError : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite loss or parameter.
class Divergence : public Error {
public:
    using Error::Error;
};

/// A stream was cut inside a level chunk. `last_renderable_lod` is -1 when
/// not even level 0 arrived intact.
class IncompleteLevel : public FormatError {
public:
    IncompleteLevel(int incomplete_level, int last_renderable_lod)
        : FormatError("incomplete level " + std::to_string(incomplete_level) +
                      " (last renderable lod: " + std::to_string(last_renderable_lod) + ")"),
          incomplete_level_(incomplete_level),
          last_renderable_lod_(last_renderable_lod) {}

    int incomplete_level() const noexcept { return incomplete_level_; }
    int last_renderable_lod() const noexcept { return last_renderable_lod_; }

private:
    int incomplete_level_;
    int last_renderable_lod_;
};

}  // namespace vqad
