#pragma once

#include <complex>
#include <cstddef>
#include <mutex>
#include <span>
#include <stdexcept>

#include <fftw3.h>

namespace qfcsim {

/// In-place 1-D complex transform of a fixed length backed by FFTW.
///
/// forward() uses the e^{-i w t} kernel; backward() is normalized so that
/// backward(forward(x)) == x. Plans are built with FFTW_ESTIMATE so results
/// do not depend on runtime measurement.
class Fft {
 public:
  explicit Fft(std::size_t n) : n_(n) {
    if (n == 0) throw std::invalid_argument("Fft: length must be positive");
    buffer_ = fftw_alloc_complex(n);
    if (buffer_ == nullptr) throw std::bad_alloc();
    // Planner calls are not thread-safe; execution is.
    std::lock_guard lock(planner_mutex());
    forward_ = fftw_plan_dft_1d(static_cast<int>(n), buffer_, buffer_, FFTW_FORWARD,
                                FFTW_ESTIMATE);
    backward_ = fftw_plan_dft_1d(static_cast<int>(n), buffer_, buffer_, FFTW_BACKWARD,
                                 FFTW_ESTIMATE);
  }

  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;

  ~Fft() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
    fftw_free(buffer_);
  }

  std::size_t size() const { return n_; }

  void forward(std::span<std::complex<double>> data) { run(data, forward_, 1.0); }

  void backward(std::span<std::complex<double>> data) {
    run(data, backward_, 1.0 / static_cast<double>(n_));
  }

 private:
  static std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
  }

  void run(std::span<std::complex<double>> data, fftw_plan plan, double scale) {
    if (data.size() != n_) throw std::invalid_argument("Fft: length mismatch");
    auto* buf = reinterpret_cast<std::complex<double>*>(buffer_);
    for (std::size_t i = 0; i < n_; ++i) buf[i] = data[i];
    fftw_execute(plan);
    for (std::size_t i = 0; i < n_; ++i) data[i] = buf[i] * scale;
  }

  std::size_t n_;
  fftw_complex* buffer_ = nullptr;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
};

}  // namespace qfcsim
