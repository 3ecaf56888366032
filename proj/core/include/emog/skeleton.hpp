#pragma once

#include <string>
#include <vector>

namespace emog {

/// Joint names and parent links of an articulated skeleton.
class SkeletonSpec {
 public:
  SkeletonSpec() = default;
  /// Validates names (unique, non-empty) and parents (-1 or an earlier joint
  /// index, no cycles).
  SkeletonSpec(std::vector<std::string> names, std::vector<int> parents);

  /// 47-joint upper body: 9 spine/head joints plus 19 joints per arm/hand.
  static SkeletonSpec upper_body();
  /// Small synthetic chain for tests: joint_0 -> joint_1 -> ...
  static SkeletonSpec chain(std::size_t joints);

  std::size_t joint_count() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<int>& parents() const { return parents_; }
  int index_of(const std::string& name) const;  // -1 if absent

  /// Named joint groups: "body", "left_hand", "right_hand", plus "all".
  std::vector<std::string> group_names() const;
  std::vector<int> group(const std::string& group) const;

  bool operator==(const SkeletonSpec&) const = default;

 private:
  std::vector<std::string> names_;
  std::vector<int> parents_;
};

}  // namespace emog
