#include "stlisp/stobj_table.hpp"

#include "stlisp/stobj.hpp"

#include <algorithm>

namespace stlisp {

namespace {

// Alist with every pair keyed by `key` dropped; shares the untouched tail.
Value remove_key(const Value& alist, const Value& key) {
  std::vector<Value> prefix;
  const Value* p = &alist;
  for (; p->is_cons(); p = &p->cdr()) {
    if (p->car().car().eq(key)) {
      Value out = p->cdr();
      for (auto it = prefix.rbegin(); it != prefix.rend(); ++it)
        out = Value::cons(*it, std::move(out));
      return out;
    }
    prefix.push_back(p->car());
  }
  return alist;
}

}  // namespace

StobjTable::StobjTable(Rep rep) {
  if (rep == Rep::Hash) rep_.emplace<HashRep>();
}

StobjTable::Rep StobjTable::rep() const noexcept {
  return std::holds_alternative<Value>(rep_) ? Rep::Alist : Rep::Hash;
}

std::optional<Value> StobjTable::get(const Value& key) const {
  if (const auto* alist = std::get_if<Value>(&rep_)) {
    for (const Value* p = alist; p->is_cons(); p = &p->cdr())
      if (p->car().car().eq(key)) return p->car().cdr();
    return std::nullopt;
  }
  const auto& h = std::get<HashRep>(rep_);
  auto it = h.map.find(key);
  if (it == h.map.end()) return std::nullopt;
  return it->second.child;
}

bool StobjTable::boundp(const Value& key) const { return get(key).has_value(); }

void StobjTable::put(const Value& key, Value child) {
  if (auto* alist = std::get_if<Value>(&rep_)) {
    *alist = Value::cons(Value::cons(key, std::move(child)),
                         remove_key(*alist, key));
    return;
  }
  auto& h = std::get<HashRep>(rep_);
  h.map.insert_or_assign(key, HashEntry{std::move(child), h.next_stamp++});
}

void StobjTable::rem(const Value& key) {
  if (auto* alist = std::get_if<Value>(&rep_)) {
    *alist = remove_key(*alist, key);
    return;
  }
  std::get<HashRep>(rep_).map.erase(key);
}

std::size_t StobjTable::count() const {
  if (const auto* alist = std::get_if<Value>(&rep_)) return length(*alist);
  return std::get<HashRep>(rep_).map.size();
}

void StobjTable::clear() {
  if (auto* alist = std::get_if<Value>(&rep_)) {
    *alist = Value{};
    return;
  }
  std::get<HashRep>(rep_).map.clear();
}

Value StobjTable::entries() const {
  if (const auto* alist = std::get_if<Value>(&rep_)) return *alist;
  const auto& h = std::get<HashRep>(rep_);
  std::vector<std::pair<std::uint64_t, Value>> ordered;
  ordered.reserve(h.map.size());
  for (const auto& [key, entry] : h.map)
    ordered.emplace_back(entry.stamp, Value::cons(key, entry.child));
  std::sort(ordered.begin(), ordered.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<Value> pairs;
  pairs.reserve(ordered.size());
  for (auto& [stamp, pair] : ordered) pairs.push_back(std::move(pair));
  return list_from(pairs);
}

Value StobjTable::logical_view() const {
  std::vector<Value> pairs;
  Value e = entries();
  for (const Value* q = &e; q->is_cons(); q = &q->cdr())
    pairs.push_back(Value::cons(q->car().car(), logical_of(q->car().cdr())));
  return list_from(pairs);
}

void StobjTable::transform_children(
    const std::function<Value(const Value&, const Value&)>& fn) {
  if (auto* alist = std::get_if<Value>(&rep_)) {
    std::vector<Value> pairs;
    for (const Value* p = alist; p->is_cons(); p = &p->cdr())
      pairs.push_back(Value::cons(p->car().car(), fn(p->car().car(), p->car().cdr())));
    *alist = list_from(pairs);
    return;
  }
  for (auto& [key, entry] : std::get<HashRep>(rep_).map)
    entry.child = fn(key, entry.child);
}

void StobjTable::for_each_child(
    const std::function<void(const Value&, const Value&)>& fn) const {
  Value e = entries();
  for (const Value* q = &e; q->is_cons(); q = &q->cdr())
    fn(q->car().car(), q->car().cdr());
}

}  // namespace stlisp
