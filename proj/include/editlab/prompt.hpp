#pragma once

#include <string>

namespace editlab {

/// Discrete attribute prompt: (shape, position, intensity) token ids. The
/// reserved id 0 in every slot denotes the null prompt.
struct Prompt {
  int shape_id = 0;
  int position_id = 0;
  int intensity_id = 0;

  static constexpr int kShapeVocab = 4;      // null, disk, square, cross
  static constexpr int kPositionVocab = 5;   // null, NW, NE, SW, SE
  static constexpr int kIntensityVocab = 4;  // null, low, mid, high

  static Prompt null() { return {}; }
  bool is_null() const { return shape_id == 0 && position_id == 0 && intensity_id == 0; }
  bool operator==(const Prompt&) const = default;

  /// Token ids within vocabulary bounds.
  bool valid() const;

  /// "s:p:i" token-id form, e.g. "1:2:3".
  std::string to_string() const;
  static Prompt parse(const std::string& s);

  /// Human-readable attribute names, e.g. "disk/NE/high".
  std::string describe() const;
};

}  // namespace editlab
