#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

namespace mwcnn::detail {

// Iterative radix-2 Cooley-Tukey FFT, double precision. Only used to speed
// up long FIR convolutions via overlap-add; the direct convolution remains
// the reference path and the two are cross-checked in tests.

inline void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * M_PI / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const auto u = a[i + k];
        const auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse) {
    for (auto& x : a) x /= static_cast<double>(n);
  }
}

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Linear convolution y = x * h (length n + k - 1), direct evaluation.
inline std::vector<double> convolve_direct(const std::vector<double>& x, const std::vector<double>& h) {
  const std::size_t n = x.size(), k = h.size();
  std::vector<double> y(n + k - 1, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    const double hv = h[j];
    for (std::size_t i = 0; i < n; ++i) y[i + j] += hv * x[i];
  }
  return y;
}

// Linear convolution via FFT overlap-add.
inline std::vector<double> convolve_fft(const std::vector<double>& x, const std::vector<double>& h) {
  const std::size_t n = x.size(), k = h.size();
  const std::size_t fft_n = next_pow2(std::max<std::size_t>(4 * k, 1024));
  const std::size_t block = fft_n - k + 1;

  std::vector<std::complex<double>> hf(fft_n);
  for (std::size_t i = 0; i < k; ++i) hf[i] = h[i];
  fft_inplace(hf, false);

  std::vector<double> y(n + k - 1, 0.0);
  std::vector<std::complex<double>> buf(fft_n);
  for (std::size_t start = 0; start < n; start += block) {
    const std::size_t len = std::min(block, n - start);
    std::fill(buf.begin(), buf.end(), std::complex<double>(0.0, 0.0));
    for (std::size_t i = 0; i < len; ++i) buf[i] = x[start + i];
    fft_inplace(buf, false);
    for (std::size_t i = 0; i < fft_n; ++i) buf[i] *= hf[i];
    fft_inplace(buf, true);
    const std::size_t out_len = std::min(len + k - 1, y.size() - start);
    for (std::size_t i = 0; i < out_len; ++i) y[start + i] += buf[i].real();
  }
  return y;
}

// Picks FFT vs direct by operation count.
inline std::vector<double> convolve(const std::vector<double>& x, const std::vector<double>& h) {
  const auto cost = static_cast<std::uint64_t>(x.size()) * h.size();
  if (h.size() >= 64 && cost > (1ull << 21)) return convolve_fft(x, h);
  return convolve_direct(x, h);
}

}  // namespace mwcnn::detail
