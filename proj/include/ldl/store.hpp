#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "ldl/csv.hpp"
#include "ldl/value.hpp"

namespace ldl {

struct StoreError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class InsertResult { Inserted, Duplicate };

using ScanPattern = std::vector<std::optional<Value>>;  // ground positions only

// Duplicate-free tuple set with insertion-order rows, lazy binding-pattern
// indexes, and an optional immutable base relation installed by the
// copy-rule optimization. Rows are addressed globally: base rows first.
class Relation {
public:
    Relation(std::string name, size_t arity) : name_(std::move(name)), arity_(arity) {}

    const std::string& name() const { return name_; }
    size_t arity() const { return arity_; }
    size_t size() const { return base_size() + rows_.size(); }
    bool empty() const { return size() == 0; }

    void install_base(std::shared_ptr<const Relation> base) {
        if (size() > 0) throw StoreError("base install on a non-empty relation");
        base_ = std::move(base);
        indexes_.clear();
    }
    const std::shared_ptr<const Relation>& base() const { return base_; }

    const Tuple& row(size_t i) const {
        size_t b = base_size();
        return i < b ? base_->row(i) : rows_[i - b];
    }

    bool contains(const Tuple& t) const {
        if (dedup_.count(t)) return true;
        return base_ && base_->contains(t);
    }

    InsertResult insert_if_new(Tuple t) {
        if (t.size() != arity_)
            throw StoreError("arity mismatch inserting into " + name_ + ": got " +
                             std::to_string(t.size()) + ", want " + std::to_string(arity_));
        if (contains(t)) return InsertResult::Duplicate;
        size_t id = size();
        dedup_.insert(t);
        for (auto& [mask, index] : indexes_) index[key_for(mask, t)].push_back(id);
        rows_.push_back(std::move(t));
        return InsertResult::Inserted;
    }

    // Enumerate rows matching the ground positions of `pat`, starting at
    // global row `from`. Uses (and lazily builds) an index for the bound
    // mask on full scans of relations past the index threshold.
    template <class F>
    void for_each_match(const ScanPattern& pat, size_t from, F&& f) const {
        uint64_t mask = 0;
        for (size_t i = 0; i < pat.size() && i < 64; ++i)
            if (pat[i]) mask |= uint64_t(1) << i;
        if (mask && from == 0 && size() > kIndexThreshold && pat.size() <= 64) {
            const auto& index = ensure_index(mask);
            Tuple key;
            for (size_t i = 0; i < pat.size(); ++i)
                if (pat[i]) key.push_back(*pat[i]);
            auto it = index.find(key);
            if (it == index.end()) return;
            for (size_t id : it->second)
                if (!f(id, row(id))) return;
            return;
        }
        size_t n = size();
        for (size_t id = from; id < n; ++id) {
            const Tuple& t = row(id);
            bool ok = true;
            for (size_t i = 0; i < pat.size(); ++i)
                if (pat[i] && !(*pat[i] == t[i])) {
                    ok = false;
                    break;
                }
            if (ok && !f(id, t)) return;
        }
    }

    std::vector<Tuple> all_tuples() const {
        std::vector<Tuple> out;
        out.reserve(size());
        for (size_t i = 0; i < size(); ++i) out.push_back(row(i));
        return out;
    }

    std::set<Tuple> as_set() const {
        std::set<Tuple> out;
        for (size_t i = 0; i < size(); ++i) out.insert(row(i));
        return out;
    }

    static constexpr size_t kIndexThreshold = 64;

private:
    size_t base_size() const { return base_ ? base_->size() : 0; }

    static Tuple key_for(uint64_t mask, const Tuple& t) {
        Tuple key;
        for (size_t i = 0; i < t.size() && i < 64; ++i)
            if (mask & (uint64_t(1) << i)) key.push_back(t[i]);
        return key;
    }

    using Index = std::map<Tuple, std::vector<size_t>>;

    const Index& ensure_index(uint64_t mask) const {
        auto it = indexes_.find(mask);
        if (it != indexes_.end()) return it->second;
        Index index;
        for (size_t id = 0; id < size(); ++id) index[key_for(mask, row(id))].push_back(id);
        return indexes_.emplace(mask, std::move(index)).first->second;
    }

    std::string name_;
    size_t arity_;
    std::shared_ptr<const Relation> base_;
    std::vector<Tuple> rows_;
    std::set<Tuple> dedup_;
    mutable std::map<uint64_t, Index> indexes_;
};

// Per-choice-rule memo enforcing the functional dependencies of its choice
// goals. fd_insert is atomic across goals; re-deriving an already chosen
// tuple is accepted.
class ChosenTable {
public:
    struct GoalProjection {
        std::vector<size_t> left, right;  // positions within W
    };

    explicit ChosenTable(std::vector<GoalProjection> projections = {})
        : projections_(std::move(projections)), maps_(projections_.size()) {}

    enum class Fd { Accepted, Violates };

    Fd fd_insert(const Tuple& w) {
        for (size_t i = 0; i < projections_.size(); ++i) {
            Tuple l = project(projections_[i].left, w);
            Tuple r = project(projections_[i].right, w);
            auto it = maps_[i].find(l);
            if (it != maps_[i].end() && !(it->second == r)) return Fd::Violates;
        }
        for (size_t i = 0; i < projections_.size(); ++i) {
            Tuple l = project(projections_[i].left, w);
            maps_[i].emplace(std::move(l), project(projections_[i].right, w));
        }
        chosen_.insert(w);
        return Fd::Accepted;
    }

    const std::set<Tuple>& chosen() const { return chosen_; }
    void clear() {
        for (auto& m : maps_) m.clear();
        chosen_.clear();
    }

private:
    static Tuple project(const std::vector<size_t>& idx, const Tuple& w) {
        Tuple out;
        out.reserve(idx.size());
        for (size_t i : idx) out.push_back(w[i]);
        return out;
    }

    std::vector<GoalProjection> projections_;
    std::vector<std::map<Tuple, Tuple>> maps_;
    std::set<Tuple> chosen_;
};

// Relation store for one evaluation session. Handles are shared pointers
// so old/new swapping is a constant-time pointer exchange.
class Store {
public:
    std::shared_ptr<Relation> relation(const std::string& name, size_t arity) {
        auto it = rels_.find(name);
        if (it != rels_.end()) {
            if (it->second->arity() != arity)
                throw StoreError("arity mismatch for relation " + name);
            return it->second;
        }
        auto r = std::make_shared<Relation>(name, arity);
        rels_[name] = r;
        return r;
    }

    std::shared_ptr<Relation> find(const std::string& name) const {
        auto it = rels_.find(name);
        return it == rels_.end() ? nullptr : it->second;
    }

    // Old takes the former new contents; new becomes a fresh empty
    // relation. Cost independent of relation sizes.
    void swap_state(const std::string& old_name, const std::string& new_name) {
        auto o = rels_.find(old_name), n = rels_.find(new_name);
        if (o == rels_.end() || n == rels_.end()) throw StoreError("unknown state pair");
        size_t arity = n->second->arity();
        o->second = n->second;
        n->second = std::make_shared<Relation>(new_name, arity);
    }

    void reset(const std::string& name) {
        auto it = rels_.find(name);
        if (it != rels_.end())
            it->second = std::make_shared<Relation>(name, it->second->arity());
    }

    void load_csv(const std::string& pred, const std::vector<std::pair<std::string, std::string>>& columns,
                  const std::string& path) {
        auto rows = csv::read_file(path);
        if (rows.empty()) return;
        const auto& header = rows[0];
        if (header.size() != columns.size())
            throw CsvError(path + ": header has " + std::to_string(header.size()) +
                           " columns, schema declares " + std::to_string(columns.size()));
        auto rel = relation(pred, columns.size());
        for (size_t r = 1; r < rows.size(); ++r) {
            if (rows[r].size() != columns.size())
                throw CsvError(path + ": row " + std::to_string(r) + " has " +
                               std::to_string(rows[r].size()) + " fields");
            Tuple t;
            for (size_t c = 0; c < columns.size(); ++c)
                t.push_back(csv::typed_value(rows[r][c], columns[c].second, r, columns[c].first));
            rel->insert_if_new(std::move(t));
        }
    }

    const std::map<std::string, std::shared_ptr<Relation>>& relations() const { return rels_; }

private:
    std::map<std::string, std::shared_ptr<Relation>> rels_;
};

}  // namespace ldl
