#pragma once

#include "stlisp/value.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <unordered_map>
#include <variant>

namespace stlisp {

/// A stobj-table field: a finite map from stobj names to stobj instances.
///
/// Two representations share one interface. `Alist` is the logical model:
/// an immutable alist of (name . child), most recent binding first, with
/// no duplicate keys; copying it is O(1), so copy-on-write parents use it.
/// `Hash` is the execution model: a hash table keyed by symbol identity,
/// mutated in place. Both expose the same logical view.
class StobjTable {
 public:
  enum class Rep { Alist, Hash };

  explicit StobjTable(Rep rep = Rep::Alist);

  Rep rep() const noexcept;

  /// hons-assoc-equal on the logical alist.
  std::optional<Value> get(const Value& key) const;
  bool boundp(const Value& key) const;
  void put(const Value& key, Value child);
  void rem(const Value& key);
  std::size_t count() const;
  void clear();

  /// Alist of (key . child-stobj), most recently put first.
  Value entries() const;
  /// Alist of (key . logical-view-of-child).
  Value logical_view() const;

  /// Replaces each child by `fn(key, child)`, keeping the entry order.
  void transform_children(
      const std::function<Value(const Value& key, const Value& child)>& fn);

  void for_each_child(const std::function<void(const Value& key,
                                               const Value& child)>& fn) const;

 private:
  struct HashEntry {
    Value child;
    std::uint64_t stamp;
  };
  using HashMap =
      std::unordered_map<Value, HashEntry, IdentityHash, IdentityEq>;
  struct HashRep {
    HashMap map;
    std::uint64_t next_stamp = 0;
  };

  std::variant<Value, HashRep> rep_;
};

}  // namespace stlisp
