// Writes a VGG-16 prefix archive with He-normal weights and small biases.
// Usage: make_random_vgg <out.ibwt> [seed]
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <random>

#include "iburd/tensor_archive.hpp"
#include "iburd/vgg.hpp"

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: make_random_vgg <out.ibwt> [seed]\n";
        return 1;
    }
    const unsigned long long seed = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 20240611ULL;
    std::mt19937_64 rng(seed);
    std::vector<iburd::ArchiveTensor> tensors;
    for (const auto& spec : iburd::vgg16_prefix_architecture()) {
        std::normal_distribution<double> w(0.0, std::sqrt(2.0 / (9.0 * spec.in_channels)));
        std::uniform_real_distribution<double> b(-0.01, 0.01);
        iburd::ArchiveTensor weight{std::string(spec.name) + ".weight", {spec.out_channels, spec.in_channels, 3, 3}, {}};
        weight.values.resize(static_cast<std::size_t>(spec.out_channels) * spec.in_channels * 9);
        for (float& v : weight.values) {
            v = static_cast<float>(w(rng));
        }
        iburd::ArchiveTensor bias{std::string(spec.name) + ".bias", {spec.out_channels}, {}};
        bias.values.resize(static_cast<std::size_t>(spec.out_channels));
        for (float& v : bias.values) {
            v = static_cast<float>(b(rng));
        }
        tensors.push_back(std::move(weight));
        tensors.push_back(std::move(bias));
    }
    try {
        iburd::write_archive(argv[1], tensors);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
