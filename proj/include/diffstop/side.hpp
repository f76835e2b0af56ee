#pragma once

namespace diffstop {

/// Which one-sided limit is meant.
enum class Side { Left, Right };

}  // namespace diffstop
