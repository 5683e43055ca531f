// msfser/fft.hpp

// Copyright 2026 The msfser Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MSFSER_FFT_HPP_
#define MSFSER_FFT_HPP_

#include <complex>
#include <span>
#include <vector>

namespace msfser {

/// Forward DFT of any length, X[k] = sum_n x[n] exp(-2 pi i k n / N).
/// Mixed-radix Cooley-Tukey over the prime factors of N; prime lengths fall
/// back to the direct sum.
std::vector<std::complex<double>> Fft(std::span<const std::complex<double>> x);

/// |X[k]| for k = 0..N/2 of a real input of length N.
std::vector<double> OneSidedMagnitude(std::span<const double> x);

}  // namespace msfser

#endif  // MSFSER_FFT_HPP_
