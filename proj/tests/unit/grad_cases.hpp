#pragma once

#include <functional>
#include <string>
#include <vector>

#include "test_support.hpp"

namespace gtest_support {

/// One differentiable op with a generator for its random inputs.
struct GradCase {
  std::string name;
  std::function<std::vector<Tensor>(Rng&)> inputs;
  gtest_support::OpFn op;
};

inline std::vector<GradCase> grad_cases() {
  using V = std::vector<ad::Var>;
  return {
      {"conv2d_s1_p0", [](Rng& r) { return std::vector{random_tensor({2, 2, 5, 5}, r), random_tensor({3, 2, 3, 3}, r)}; },
       [](ad::Tape&, const V& v) { return ad::conv2d(v[0], v[1], {1, 0}); }},
      {"conv2d_s2_p1", [](Rng& r) { return std::vector{random_tensor({1, 3, 6, 6}, r), random_tensor({2, 3, 4, 4}, r)}; },
       [](ad::Tape&, const V& v) { return ad::conv2d(v[0], v[1], {2, 1}); }},
      {"conv_transpose2d_s1_p1",
       [](Rng& r) { return std::vector{random_tensor({2, 3, 4, 4}, r), random_tensor({3, 2, 3, 3}, r)}; },
       [](ad::Tape&, const V& v) { return ad::conv_transpose2d(v[0], v[1], {1, 1}); }},
      {"conv_transpose2d_s2_p1",
       [](Rng& r) { return std::vector{random_tensor({1, 2, 3, 3}, r), random_tensor({2, 3, 4, 4}, r)}; },
       [](ad::Tape&, const V& v) { return ad::conv_transpose2d(v[0], v[1], {2, 1}); }},
      {"linear",
       [](Rng& r) { return std::vector{random_tensor({3, 4}, r), random_tensor({4, 5}, r), random_tensor({5}, r)}; },
       [](ad::Tape&, const V& v) { return ad::linear(v[0], v[1], v[2]); }},
      {"add_channel_bias", [](Rng& r) { return std::vector{random_tensor({2, 3, 2, 2}, r), random_tensor({3}, r)}; },
       [](ad::Tape&, const V& v) { return ad::add_channel_bias(v[0], v[1]); }},
      {"leaky_relu", [](Rng& r) { return std::vector{away_from_zero({4, 6}, r)}; },
       [](ad::Tape&, const V& v) { return ad::leaky_relu(v[0], 0.2f); }},
      {"tanh", [](Rng& r) { return std::vector{random_tensor({4, 6}, r, -2, 2)}; },
       [](ad::Tape&, const V& v) { return ad::tanh(v[0]); }},
      {"softplus", [](Rng& r) { return std::vector{random_tensor({4, 6}, r, -3, 3)}; },
       [](ad::Tape&, const V& v) { return ad::softplus(v[0]); }},
      {"add", [](Rng& r) { return std::vector{random_tensor({3, 4}, r), random_tensor({3, 4}, r)}; },
       [](ad::Tape&, const V& v) { return ad::add(v[0], v[1]); }},
      {"sub", [](Rng& r) { return std::vector{random_tensor({3, 4}, r), random_tensor({3, 4}, r)}; },
       [](ad::Tape&, const V& v) { return ad::sub(v[0], v[1]); }},
      {"scale", [](Rng& r) { return std::vector{random_tensor({3, 4}, r)}; },
       [](ad::Tape&, const V& v) { return ad::scale(v[0], -1.7f); }},
      {"reshape", [](Rng& r) { return std::vector{random_tensor({2, 6}, r)}; },
       [](ad::Tape&, const V& v) { return ad::reshape(v[0], {3, 4}); }},
      {"sum", [](Rng& r) { return std::vector{random_tensor({3, 5}, r)}; },
       [](ad::Tape&, const V& v) { return ad::sum(v[0]); }},
      {"mean", [](Rng& r) { return std::vector{random_tensor({3, 5}, r)}; },
       [](ad::Tape&, const V& v) { return ad::mean(v[0]); }},
      {"l1", [](Rng& r) { return std::vector{away_from_zero({3, 5}, r), Tensor::zeros({3, 5})}; },
       [](ad::Tape&, const V& v) { return ad::l1(v[0], v[1]); }},
      {"l2", [](Rng& r) { return std::vector{random_tensor({3, 5}, r)}; },
       [](ad::Tape&, const V& v) { return ad::l2(v[0]); }},
      {"sq_dist", [](Rng& r) { return std::vector{random_tensor({3, 5}, r), random_tensor({3, 5}, r)}; },
       [](ad::Tape&, const V& v) { return ad::sq_dist(v[0], v[1]); }},
      {"l1_per_sample", [](Rng& r) { return std::vector{away_from_zero({3, 2, 2}, r), Tensor::zeros({3, 2, 2})}; },
       [](ad::Tape&, const V& v) { return ad::l1_per_sample(v[0], v[1]); }},
      {"sq_dist_per_sample",
       [](Rng& r) { return std::vector{random_tensor({3, 2, 2}, r), random_tensor({3, 2, 2}, r)}; },
       [](ad::Tape&, const V& v) { return ad::sq_dist_per_sample(v[0], v[1]); }},
      {"l2_per_sample", [](Rng& r) { return std::vector{random_tensor({3, 4}, r)}; },
       [](ad::Tape&, const V& v) { return ad::l2_per_sample(v[0]); }},
  };
}

}  // namespace gtest_support
