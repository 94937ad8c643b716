#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <optional>

#include "tiertrack/geometry.hpp"

namespace tiertrack {

struct Detection {
  int frame = 0;
  BBoxd bbox{0, 0, 1, 1};
  double conf = 0.0;
  std::optional<Eigen::VectorXd> embedding;  // unit L2 norm
  std::optional<Eigen::VectorXd> logits;
  std::size_t source_index = 0;  // input order, breaks ties deterministically
};

struct GtBox {
  int frame = 0;
  int track_id = 0;
  BBoxd bbox{0, 0, 1, 1};
  int class_id = -1;
  double visibility = 1.0;
  bool ignore = false;  // MOT17 flag column == 0
};

struct TrackRecord {
  int frame = 0;
  int track_id = 0;
  BBoxd bbox{0, 0, 1, 1};
  double conf = 0.0;
  std::optional<int> class_id;
};

}  // namespace tiertrack
