// Copyright 2026 The trajattn Authors
// SPDX-License-Identifier: Apache-2.0

#include "harness/moving_dot.hpp"

#include <algorithm>

#include "core/error.hpp"

namespace trajattn {

std::string to_string(Direction d) {
  switch (d) {
    case Direction::kUp: return "up";
    case Direction::kDown: return "down";
    case Direction::kLeft: return "left";
    case Direction::kRight: return "right";
  }
  return "unknown";
}

Direction parse_direction(const std::string& name) {
  if (name == "up") return Direction::kUp;
  if (name == "down") return Direction::kDown;
  if (name == "left") return Direction::kLeft;
  if (name == "right") return Direction::kRight;
  fail(ErrorCode::kConfig, "unknown direction '" + name + "'");
}

std::size_t MovingDotSpec::reach() const {
  const std::size_t mid = frames / 2;
  return speed * stride * std::max(mid, frames - 1 - mid);
}

void MovingDotSpec::validate() const {
  require(frames >= 1 && height >= 1 && width >= 1 && dot >= 1, ErrorCode::kConfig,
          "moving dot: frames, height, width and dot must be positive");
  require(stride >= 1, ErrorCode::kConfig, "moving dot: stride must be >= 1");
  require(speed >= 1, ErrorCode::kConfig,
          "moving dot: speed 0 leaves every direction label indistinguishable");
  require(noise >= 0.0, ErrorCode::kConfig, "moving dot: noise std must be >= 0");
  const std::size_t span = dot + 2 * reach();
  require(span <= height && span <= width, ErrorCode::kConfig,
          [&] { return "moving dot: path spans " + std::to_string(span) + " px, canvas is " +
              std::to_string(height) + "x" + std::to_string(width); });
}

MovingDotSample gen_moving_dot(const MovingDotSpec& spec, Rng& rng) {
  spec.validate();
  const std::size_t reach = spec.reach();
  const std::size_t cy = reach + rng.uniform_index(spec.height - spec.dot - 2 * reach + 1);
  const std::size_t cx = reach + rng.uniform_index(spec.width - spec.dot - 2 * reach + 1);
  const long step = static_cast<long>(spec.speed * spec.stride);
  long dy = 0, dx = 0;
  switch (spec.direction) {
    case Direction::kUp: dy = -step; break;
    case Direction::kDown: dy = step; break;
    case Direction::kLeft: dx = -step; break;
    case Direction::kRight: dx = step; break;
  }
  const long mid = static_cast<long>(spec.frames / 2);

  Tensor frames({spec.frames, 1, spec.height, spec.width});
  std::vector<DotPosition> positions;
  for (std::size_t t = 0; t < spec.frames; ++t) {
    const long off = static_cast<long>(t) - mid;
    const DotPosition p{static_cast<std::size_t>(static_cast<long>(cy) + off * dy),
                        static_cast<std::size_t>(static_cast<long>(cx) + off * dx)};
    positions.push_back(p);
    const std::size_t base = t * spec.height * spec.width;
    for (std::size_t i = 0; i < spec.height * spec.width; ++i)
      frames[base + i] = spec.noise > 0.0 ? spec.noise * rng.normal() : 0.0;
    for (std::size_t y = 0; y < spec.dot; ++y)
      for (std::size_t x = 0; x < spec.dot; ++x)
        frames[base + (p.y + y) * spec.width + p.x + x] += spec.intensity;
  }
  return {VideoClip(std::move(frames)), static_cast<std::size_t>(spec.direction),
          std::move(positions)};
}

std::vector<MovingDotSample> gen_moving_dot_set(MovingDotSpec spec, std::size_t count,
                                                std::uint64_t seed) {
  std::vector<MovingDotSample> out;
  out.reserve(count);
  const Rng root(seed);
  for (std::size_t i = 0; i < count; ++i) {
    spec.direction = static_cast<Direction>(i % kDirectionCount);
    Rng rng = root.fork(i);
    out.push_back(gen_moving_dot(spec, rng));
  }
  return out;
}

VideoClip middle_frame(const VideoClip& clip) {
  const InputGeometry g = clip.geometry();
  const std::size_t plane = g.channels * g.height * g.width;
  const std::size_t mid = g.frames / 2;
  Tensor f({1, g.channels, g.height, g.width});
  std::copy_n(clip.frames.data().begin() + static_cast<std::ptrdiff_t>(mid * plane), plane,
              f.data().begin());
  return VideoClip(std::move(f));
}

}  // namespace trajattn
