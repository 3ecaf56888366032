#include "emog/skeleton.hpp"

#include <algorithm>
#include <set>

#include "emog/error.hpp"

namespace emog {

SkeletonSpec::SkeletonSpec(std::vector<std::string> names, std::vector<int> parents)
    : names_(std::move(names)), parents_(std::move(parents)) {
  if (names_.empty()) throw ArgumentError("skeleton needs at least one joint");
  if (names_.size() != parents_.size()) {
    throw ArgumentError("skeleton has " + std::to_string(names_.size()) + " names but " +
                        std::to_string(parents_.size()) + " parent links");
  }
  std::set<std::string> seen;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    const auto& n = names_[i];
    if (n.empty() || n.find_first_of(" \t\r\n") != std::string::npos) {
      throw ArgumentError("invalid joint name '" + n + "'");
    }
    if (!seen.insert(n).second) throw ArgumentError("duplicate joint name '" + n + "'");
    // Parents must precede children, which rules out cycles.
    if (parents_[i] < -1 || parents_[i] >= static_cast<int>(i)) {
      throw ArgumentError("joint '" + n + "' has invalid parent index " + std::to_string(parents_[i]));
    }
  }
}

namespace {

void add_arm(const std::string& side, int spine_top, std::vector<std::string>& names, std::vector<int>& parents) {
  const int shoulder = static_cast<int>(names.size());
  names.push_back(side + "Shoulder");
  parents.push_back(spine_top);
  names.push_back(side + "Arm");
  parents.push_back(shoulder);
  names.push_back(side + "ForeArm");
  parents.push_back(shoulder + 1);
  const int hand = static_cast<int>(names.size());
  names.push_back(side + "Hand");
  parents.push_back(shoulder + 2);
  for (const char* finger : {"Thumb", "Index", "Middle", "Ring", "Pinky"}) {
    int parent = hand;
    for (int k = 1; k <= 3; ++k) {
      names.push_back(side + "Hand" + finger + std::to_string(k));
      parents.push_back(parent);
      parent = static_cast<int>(names.size()) - 1;
    }
  }
}

}  // namespace

SkeletonSpec SkeletonSpec::upper_body() {
  std::vector<std::string> names = {"Hips", "Spine", "Spine1", "Spine2", "Spine3", "Neck", "Neck1", "Head", "HeadEnd"};
  std::vector<int> parents = {-1, 0, 1, 2, 3, 4, 5, 6, 7};
  add_arm("Right", 4, names, parents);
  add_arm("Left", 4, names, parents);
  return SkeletonSpec(std::move(names), std::move(parents));
}

SkeletonSpec SkeletonSpec::chain(std::size_t joints) {
  std::vector<std::string> names;
  std::vector<int> parents;
  for (std::size_t i = 0; i < joints; ++i) {
    names.push_back("joint_" + std::to_string(i));
    parents.push_back(static_cast<int>(i) - 1);
  }
  return SkeletonSpec(std::move(names), std::move(parents));
}

int SkeletonSpec::index_of(const std::string& name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  return it == names_.end() ? -1 : static_cast<int>(it - names_.begin());
}

std::vector<std::string> SkeletonSpec::group_names() const {
  return {"all", "body", "left_hand", "right_hand"};
}

std::vector<int> SkeletonSpec::group(const std::string& group) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    const auto& n = names_[i];
    const bool left = n.rfind("Left", 0) == 0;
    const bool right = n.rfind("Right", 0) == 0;
    if (group == "all" || (group == "left_hand" && left) || (group == "right_hand" && right) ||
        (group == "body" && !left && !right)) {
      out.push_back(static_cast<int>(i));
    }
  }
  if (group != "all" && group != "body" && group != "left_hand" && group != "right_hand") {
    throw ArgumentError("unknown joint group '" + group + "'");
  }
  return out;
}

}  // namespace emog
