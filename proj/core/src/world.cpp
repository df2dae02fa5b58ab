#include "stlisp/world.hpp"

#include "stlisp/error.hpp"
#include "stlisp/interpreter.hpp"
#include "stlisp/sexpr.hpp"

#include <algorithm>

namespace stlisp {

std::string show_shape(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ' ';
    out += show(s[i]);
  }
  return out + ")";
}

std::string_view event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::Defun:
      return "DEFUN";
    case EventKind::Defstobj:
      return "DEFSTOBJ";
    case EventKind::Signature:
      return "ENCAPSULATE";
    case EventKind::Defattach:
      return "DEFATTACH";
  }
  return "?";
}

World::World() { install_builtins(*this); }

const Function* World::find_function(const Value& name) const {
  auto it = functions_.find(name);
  return it == functions_.end() ? nullptr : it->second.get();
}

bool World::is_defined(const Value& name) const {
  return functions_.contains(name) || stobjs_.contains(name) ||
         signatures_.contains(name);
}

void World::add_function(std::shared_ptr<Function> fn) {
  Value name = fn->name;
  functions_.insert_or_assign(name, std::move(fn));
}

void World::remove_function(const Value& name) { functions_.erase(name); }

const StobjSpec* World::find_stobj(const Value& name) const {
  auto it = stobjs_.find(name);
  return it == stobjs_.end() ? nullptr : it->second.get();
}

std::shared_ptr<const StobjSpec> World::stobj_spec(const Value& name) const {
  auto it = stobjs_.find(name);
  return it == stobjs_.end() ? nullptr : it->second;
}

std::vector<Value> World::stobj_names() const {
  std::vector<Value> names;
  for (const auto& [name, spec] : stobjs_) names.push_back(name);
  std::sort(names.begin(), names.end(), [](const Value& a, const Value& b) {
    return a.symbol_name() < b.symbol_name();
  });
  return names;
}

const Signature* World::find_signature(const Value& name) const {
  auto it = signatures_.find(name);
  return it == signatures_.end() ? nullptr : &it->second;
}

std::optional<Value> World::attachment(const Value& signature) const {
  auto it = attachments_.find(signature);
  if (it == attachments_.end()) return std::nullopt;
  return it->second;
}

std::vector<Constraint> World::constraints() const {
  std::vector<Constraint> out;
  for (const auto& e : events_)
    out.insert(out.end(), e.constraints.begin(), e.constraints.end());
  return out;
}

void World::set_attachment(const Value& sig, const Value& fn) {
  if (fn.is_nil())
    attachments_.erase(sig);
  else
    attachments_.insert_or_assign(sig, fn);
}

std::uint64_t World::record(Event e) {
  e.index = next_index_++;
  switch (e.kind) {
    case EventKind::Defstobj:
      stobjs_.insert_or_assign(e.name, e.stobj);
      break;
    case EventKind::Signature:
      for (const auto& s : e.signatures) signatures_.insert_or_assign(s.name, s);
      break;
    case EventKind::Defattach: {
      auto prev = attachment(e.attach_signature);
      e.previous_attachment = prev ? *prev : Value{};
      set_attachment(e.attach_signature, e.attach_function);
      break;
    }
    case EventKind::Defun:
      break;
  }
  events_.push_back(std::move(e));
  return events_.back().index;
}

std::vector<Event> World::truncate(std::uint64_t index) {
  auto pos = std::find_if(events_.begin(), events_.end(),
                          [&](const Event& e) { return e.index == index; });
  if (pos == events_.end())
    throw EvalError("no event with index " + std::to_string(index));
  const auto keep = static_cast<std::size_t>(pos - events_.begin());
  std::vector<Event> removed;
  while (events_.size() > keep) {
    Event e = std::move(events_.back());
    events_.pop_back();
    for (const auto& fn : e.functions) functions_.erase(fn);
    switch (e.kind) {
      case EventKind::Defstobj:
        stobjs_.erase(e.name);
        break;
      case EventKind::Signature:
        for (const auto& s : e.signatures) {
          signatures_.erase(s.name);
          attachments_.erase(s.name);
        }
        break;
      case EventKind::Defattach:
        set_attachment(e.attach_signature, e.previous_attachment);
        break;
      case EventKind::Defun:
        break;
    }
    removed.push_back(std::move(e));
  }
  return removed;
}

std::optional<std::uint64_t> World::index_of(const Value& name) const {
  for (auto it = events_.rbegin(); it != events_.rend(); ++it) {
    if (it->name.eq(name)) return it->index;
    if (std::any_of(it->functions.begin(), it->functions.end(),
                    [&](const Value& f) { return f.eq(name); }))
      return it->index;
  }
  return std::nullopt;
}

}  // namespace stlisp
