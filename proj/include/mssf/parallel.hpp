// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace mssf {

/// Pins the worker count used by the convolution kernels. Results are
/// bitwise identical for a given count; values < 1 are treated as 1.
void set_num_threads(int n);
int num_threads();

}  // namespace mssf
