#pragma once

namespace vaxopt {

/// Kernels that fan out over independent work items take one of these. Serial runs the plain
/// loop that the parallel version is tested against; both return identical results.
enum class Execution { serial, parallel };

}  // namespace vaxopt
