#pragma once

#include <string>
#include <vector>

#include "ganscope/seg_stats.hpp"
#include "ganscope/tensor.hpp"

namespace ganscope::report {

/// Header "class,true_mean,gen_mean,clipped"; one row per entry.
std::string histogram_csv(const stats::HistogramReport& rep);

/// Standalone SVG with one pair of bars (truth, generated) per class.
/// Bars above the clip ceiling are cut at the ceiling and labelled with
/// their value.
std::string histogram_svg(const stats::HistogramReport& rep, const std::string& title);

struct FsdRow {
  std::string label;
  double fsd = 0.0;
  double noise_floor = -1.0;  // negative: not measured
};

/// Markdown table "| model | FSD | noise floor |".
std::string fsd_table_markdown(const std::vector<FsdRow>& rows);

/// Tiles [3,H,W] images row-major into a grid with `pad` pixels of white
/// between tiles. All images must share one shape.
Tensor tile(const std::vector<Tensor>& images, int columns, int pad = 2);

/// 2x2 block: input top-left, reconstruction top-right, their colourised
/// segmentations below.
Tensor pair_block(const Tensor& input, const Tensor& reconstruction, const Tensor& input_seg,
                  const Tensor& reconstruction_seg);

/// Fixed-notation decimal text independent of the global locale.
std::string fixed(double v, int digits);

}  // namespace ganscope::report
