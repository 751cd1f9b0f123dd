#include "spectral.hpp"

#include <fftw3.h>

#include <map>
#include <memory>
#include <mutex>

namespace nhdnls::detail {
namespace {

struct PlanPair {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
};

class PlanCache {
 public:
  const PlanPair& get(std::size_t n) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = plans_.find(n);
    if (it != plans_.end()) return it->second;
    std::vector<cplx> a(n), b(n);
    auto* in = reinterpret_cast<fftw_complex*>(a.data());
    auto* out = reinterpret_cast<fftw_complex*>(b.data());
    const int len = static_cast<int>(n);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    PlanPair p;
    p.forward = fftw_plan_dft_1d(len, in, out, FFTW_FORWARD, flags);
    p.backward = fftw_plan_dft_1d(len, in, out, FFTW_BACKWARD, flags);
    return plans_.emplace(n, p).first->second;
  }

  ~PlanCache() {
    for (auto& [n, p] : plans_) {
      fftw_destroy_plan(p.forward);
      fftw_destroy_plan(p.backward);
    }
  }

 private:
  std::mutex mutex_;
  std::map<std::size_t, PlanPair> plans_;
};

PlanCache& cache() {
  static PlanCache c;
  return c;
}

std::vector<cplx> execute(std::span<const cplx> in, bool forward) {
  const std::size_t n = in.size();
  if (n == 0) return {};
  const PlanPair& p = cache().get(n);
  std::vector<cplx> src(in.begin(), in.end());
  std::vector<cplx> dst(n);
  fftw_execute_dft(forward ? p.forward : p.backward, reinterpret_cast<fftw_complex*>(src.data()),
                   reinterpret_cast<fftw_complex*>(dst.data()));
  return dst;
}

}  // namespace

std::vector<cplx> fft(std::span<const cplx> in) { return execute(in, true); }

std::vector<cplx> ifft(std::span<const cplx> in) {
  auto out = execute(in, false);
  const double scale = 1.0 / static_cast<double>(in.size());
  for (auto& v : out) v *= scale;
  return out;
}

}  // namespace nhdnls::detail
