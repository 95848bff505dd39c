// Stand-in external predictor: reads inputs (N x C x 16 x 16) and writes the
// first channel (the driver) back as preds (N x 16 x 16).

#include <cstdio>
#include <exception>
#include <vector>

#include "downscale/npy.hpp"

int main(int argc, char** argv) {
    if (argc != 4) {
        std::fprintf(stderr, "usage: fake_predictor INPUTS INDEX OUTPUTS\n");
        return 2;
    }
    try {
        const auto in = downscale::npy::read(argv[1]);
        if (in.shape.size() != 4) throw downscale::ValidationError("inputs must be 4-D");
        const std::size_t n = in.shape[0], c = in.shape[1], px = in.shape[2] * in.shape[3];
        std::vector<double> out;
        out.reserve(n * px);
        for (std::size_t k = 0; k < n; ++k)
            out.insert(out.end(), in.data.begin() + std::ptrdiff_t(k * c * px),
                       in.data.begin() + std::ptrdiff_t(k * c * px + px));
        const std::size_t shape[3] = {n, in.shape[2], in.shape[3]};
        downscale::npy::write(argv[3], downscale::npy::Dtype::f4, shape, out);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "fake_predictor: %s\n", e.what());
        return 1;
    }
    return 0;
}
