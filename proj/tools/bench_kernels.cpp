// Compares the serial reference kernels against the OpenMP variants and
// checks that both produce bitwise-identical results.
//
//   ./sce_bench [threads]

#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include <omp.h>

#include "sce/kernels.hpp"
#include "sce/rng.hpp"

namespace {

using sce::Rng;
namespace kernels = sce::kernels;

std::vector<double> rand_vec(size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

double time_ms(const std::function<void()>& fn, int reps) {
    fn();  // warm up
    const double t0 = omp_get_wtime();
    for (int i = 0; i < reps; ++i) fn();
    return (omp_get_wtime() - t0) * 1000.0 / reps;
}

void report(const char* name, double serial_ms, double parallel_ms, bool identical) {
    std::printf("%-28s %10.3f ms %10.3f ms %8.2fx   %s\n", name, serial_ms, parallel_ms,
                serial_ms / parallel_ms, identical ? "bitwise-equal" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
    const int threads = argc > 1 ? std::atoi(argv[1]) : omp_get_max_threads();
    kernels::set_threads(threads);
    std::printf("kernel benchmark: serial reference vs OpenMP (%d threads)\n\n", threads);
    std::printf("%-28s %13s %13s %9s\n", "kernel", "serial", "parallel", "speedup");

    Rng rng(1234);

    {
        const size_t r = 256, k = 1728, n = 128;
        auto a = rand_vec(r * k, rng);
        auto b = rand_vec(k * n, rng);
        std::vector<double> cs(r * n), cp(r * n);
        const double ts = time_ms([&] { kernels::serial::matmul(a.data(), b.data(), cs.data(), r, k, n); }, 5);
        const double tp = time_ms([&] { kernels::omp::matmul(a.data(), b.data(), cp.data(), r, k, n); }, 5);
        report("matmul 256x1728x128", ts, tp, cs == cp);
    }
    {
        const size_t r = 128, k = 64, n = 4096;
        auto a = rand_vec(r * k, rng);
        auto b = rand_vec(n * k, rng);
        std::vector<double> cs(r * n), cp(r * n);
        const double ts = time_ms([&] { kernels::serial::matmul_nt(a.data(), b.data(), cs.data(), r, k, n); }, 10);
        const double tp = time_ms([&] { kernels::omp::matmul_nt(a.data(), b.data(), cp.data(), r, k, n); }, 10);
        report("similarity 128x64 vs 4096", ts, tp, cs == cp);
    }
    {
        const size_t r = 512, k = 512, n = 512;
        auto a = rand_vec(r * k, rng);
        auto g = rand_vec(r * n, rng);
        std::vector<double> cs(k * n, 0.0), cp(k * n, 0.0);
        const double ts = time_ms([&] { kernels::serial::matmul_tn_acc(a.data(), g.data(), cs.data(), r, k, n); }, 5);
        const double tp = time_ms([&] { kernels::omp::matmul_tn_acc(a.data(), g.data(), cp.data(), r, k, n); }, 5);
        report("grad-accumulate 512^3", ts, tp, cs == cp);
    }
    {
        const size_t rows = 4096, cols = 257;
        auto x = rand_vec(rows * cols, rng);
        std::vector<double> ps(rows * cols), pp(rows * cols);
        const double ts = time_ms([&] { kernels::serial::softmax_rows(x.data(), ps.data(), rows, cols); }, 10);
        const double tp = time_ms([&] { kernels::omp::softmax_rows(x.data(), pp.data(), rows, cols); }, 10);
        report("softmax 4096x257", ts, tp, ps == pp);
    }
    {
        const size_t rows = 8192, cols = 128;
        auto x = rand_vec(rows * cols, rng);
        std::vector<double> ys(rows * cols), yp(rows * cols);
        const double ts = time_ms([&] { kernels::serial::l2_normalize_rows(x.data(), ys.data(), rows, cols); }, 10);
        const double tp = time_ms([&] { kernels::omp::l2_normalize_rows(x.data(), yp.data(), rows, cols); }, 10);
        report("l2-normalize 8192x128", ts, tp, ys == yp);
    }
    {
        const size_t n = 4 * 1024 * 1024;
        auto a = rand_vec(n, rng);
        auto b = rand_vec(n, rng);
        std::vector<double> cs(n), cp(n);
        const double ts = time_ms([&] { kernels::serial::mul(a.data(), b.data(), cs.data(), n); }, 10);
        const double tp = time_ms([&] { kernels::omp::mul(a.data(), b.data(), cp.data(), n); }, 10);
        report("elementwise mul 4M", ts, tp, cs == cp);
    }

    return 0;
}
