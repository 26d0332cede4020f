// Copyright 2026 The trajattn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "core/rng.hpp"
#include "model/model.hpp"

namespace trajattn {

enum class Direction : std::size_t { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };
inline constexpr std::size_t kDirectionCount = 4;

std::string to_string(Direction d);
Direction parse_direction(const std::string& name);

struct MovingDotSpec {
  std::size_t frames = 8;  // input frames; raw time of frame j is j * stride
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t dot = 2;     // side of the square
  Direction direction = Direction::kRight;
  std::size_t speed = 1;   // pixels per raw frame
  std::size_t stride = 1;
  double noise = 0.1;      // background Gaussian std
  double intensity = 1.0;
  std::uint64_t seed = 0;

  // Rejects zero speed and any trajectory that would leave the canvas.
  void validate() const;
  // Largest displacement from the middle frame, in pixels.
  std::size_t reach() const;
};

struct DotPosition {
  std::size_t y = 0, x = 0;  // top-left corner
};

struct MovingDotSample {
  VideoClip clip;  // [frames, 1, height, width]
  std::size_t label = 0;
  std::vector<DotPosition> positions;  // one per frame
};

// The dot passes through a centre drawn uniformly from the box that keeps
// the whole path in bounds, reached at frame frames / 2. The box is the same
// on both axes and for every label, so any single frame carries no label
// information.
MovingDotSample gen_moving_dot(const MovingDotSpec& spec, Rng& rng);

// Sample i has label i mod 4 and draws from Rng(seed).fork(i).
std::vector<MovingDotSample> gen_moving_dot_set(MovingDotSpec spec, std::size_t count,
                                                std::uint64_t seed);

// The middle frame alone, as a one-frame clip.
VideoClip middle_frame(const VideoClip& clip);

}  // namespace trajattn
