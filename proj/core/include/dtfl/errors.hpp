#pragma once

#include <stdexcept>
#include <string>

namespace dtfl {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// scenario construction
struct BadConfig : Error { using Error::Error; };
struct EmptyDataset : Error { using Error::Error; };
struct BadRange : Error { using Error::Error; };

// training
struct EmptyShard : Error { using Error::Error; };
struct NonFiniteLoss : Error { using Error::Error; };

// trust
struct AllUntrusted : Error { using Error::Error; };

// energy / channel
struct DegenerateChannel : Error { using Error::Error; };

// dqn
struct LengthMismatch : Error { using Error::Error; };
struct BufferTooSmall : Error { using Error::Error; };
struct ArchMismatch : Error { using Error::Error; };

// federation
struct BadK : Error { using Error::Error; };

// config / dataset files
struct ParseError : Error { using Error::Error; };
struct UnknownKey : Error { using Error::Error; };
struct BadMagic : Error { using Error::Error; };
struct TruncatedFile : Error { using Error::Error; };
struct CountMismatch : Error { using Error::Error; };

}  // namespace dtfl
