// src/fft.cpp

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

#include "msfser/fft.hpp"

#include <cmath>
#include <numbers>

namespace msfser {

namespace {

std::size_t SmallestFactor(std::size_t n) {
  for (std::size_t p = 2; p * p <= n; ++p)
    if (n % p == 0) return p;
  return n;
}

void Transform(const std::complex<double> *in, std::size_t stride, std::size_t n,
               std::complex<double> *out) {
  if (n == 1) {
    out[0] = in[0];
    return;
  }
  const double two_pi_over_n = -2.0 * std::numbers::pi / static_cast<double>(n);
  const std::size_t p = SmallestFactor(n);
  if (p == n) {
    for (std::size_t k = 0; k < n; ++k) {
      std::complex<double> acc = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        acc += in[j * stride] * std::polar(1.0, two_pi_over_n * static_cast<double>((j * k) % n));
      out[k] = acc;
    }
    return;
  }
  // Split into p interleaved subsequences of length m, transform each, then
  // combine with twiddles: X[k] = sum_r W_N^{rk} Y_r[k mod m].
  const std::size_t m = n / p;
  std::vector<std::complex<double>> sub(n);
  for (std::size_t r = 0; r < p; ++r) Transform(in + r * stride, stride * p, m, sub.data() + r * m);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t r = 0; r < p; ++r)
      acc += sub[r * m + k % m] *
             std::polar(1.0, two_pi_over_n * static_cast<double>((r * k) % n));
    out[k] = acc;
  }
}

}  // namespace

std::vector<std::complex<double>> Fft(std::span<const std::complex<double>> x) {
  std::vector<std::complex<double>> out(x.size());
  if (!x.empty()) Transform(x.data(), 1, x.size(), out.data());
  return out;
}

std::vector<double> OneSidedMagnitude(std::span<const double> x) {
  std::vector<std::complex<double>> cx(x.begin(), x.end());
  std::vector<std::complex<double>> spec = Fft(cx);
  std::vector<double> mag(x.size() / 2 + 1);
  for (std::size_t k = 0; k < mag.size() && k < spec.size(); ++k) mag[k] = std::abs(spec[k]);
  return mag;
}

}  // namespace msfser
