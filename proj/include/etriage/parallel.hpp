#pragma once

namespace etriage {

/// Worker count to use: `requested` if positive, otherwise the OpenMP default
/// (1 when built without OpenMP).
int resolve_threads(int requested);

}  // namespace etriage
