#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <gmpxx.h>

namespace ldl {

// Ground runtime values. Tup doubles as compound terms ("" functor = plain
// tuple syntax) and as UDA state records like cs(Cnt, Sum).
class Value {
public:
    enum class Kind { Sym, Int, Flt, Str, Tup };

    Value() : kind_(Kind::Sym) {}

    static Value sym(std::string name) {
        Value v;
        v.kind_ = Kind::Sym;
        v.text_ = std::move(name);
        return v;
    }
    static Value integer(mpz_class n) {
        Value v;
        v.kind_ = Kind::Int;
        v.num_ = std::move(n);
        return v;
    }
    static Value integer(long n) { return integer(mpz_class(n)); }
    static Value real(double d) {
        Value v;
        v.kind_ = Kind::Flt;
        v.flt_ = d;
        return v;
    }
    static Value str(std::string s) {
        Value v;
        v.kind_ = Kind::Str;
        v.text_ = std::move(s);
        return v;
    }
    static Value tup(std::string functor, std::vector<Value> args) {
        Value v;
        v.kind_ = Kind::Tup;
        v.text_ = std::move(functor);
        v.args_ = std::move(args);
        return v;
    }

    Kind kind() const { return kind_; }
    bool is_int() const { return kind_ == Kind::Int; }
    bool is_flt() const { return kind_ == Kind::Flt; }
    bool is_numeric() const { return is_int() || is_flt(); }
    const std::string& text() const { return text_; }
    const mpz_class& num() const { return num_; }
    double flt() const { return flt_; }
    const std::vector<Value>& args() const { return args_; }

    double as_double() const { return is_int() ? num_.get_d() : flt_; }

    // Total order: type tag first, then value. Keeps map iteration and
    // therefore derivation order deterministic.
    int compare(const Value& o) const {
        if (kind_ != o.kind_) return kind_ < o.kind_ ? -1 : 1;
        switch (kind_) {
            case Kind::Sym:
            case Kind::Str:
                return text_.compare(o.text_);
            case Kind::Int:
                return cmp(num_, o.num_) < 0 ? -1 : (cmp(num_, o.num_) > 0 ? 1 : 0);
            case Kind::Flt:
                return flt_ < o.flt_ ? -1 : (flt_ > o.flt_ ? 1 : 0);
            case Kind::Tup: {
                if (int c = text_.compare(o.text_)) return c < 0 ? -1 : 1;
                if (args_.size() != o.args_.size())
                    return args_.size() < o.args_.size() ? -1 : 1;
                for (size_t i = 0; i < args_.size(); ++i)
                    if (int c = args_[i].compare(o.args_[i])) return c;
                return 0;
            }
        }
        return 0;
    }

    bool operator==(const Value& o) const { return compare(o) == 0; }
    bool operator!=(const Value& o) const { return compare(o) != 0; }
    bool operator<(const Value& o) const { return compare(o) < 0; }

    std::string to_string() const {
        std::ostringstream out;
        print(out);
        return out.str();
    }

    void print(std::ostream& out) const {
        switch (kind_) {
            case Kind::Sym:
                out << text_;
                break;
            case Kind::Int:
                out << num_.get_str();
                break;
            case Kind::Flt: {
                std::ostringstream tmp;
                tmp.precision(17);
                tmp << flt_;
                std::string s = tmp.str();
                out << s;
                if (s.find_first_of(".eE") == std::string::npos) out << ".0";
                break;
            }
            case Kind::Str:
                out << '\'' << text_ << '\'';
                break;
            case Kind::Tup: {
                out << text_ << '(';
                for (size_t i = 0; i < args_.size(); ++i) {
                    if (i) out << ", ";
                    args_[i].print(out);
                }
                out << ')';
                break;
            }
        }
    }

private:
    Kind kind_;
    mpz_class num_;
    double flt_ = 0;
    std::string text_;
    std::vector<Value> args_;
};

using Tuple = std::vector<Value>;

inline std::ostream& operator<<(std::ostream& out, const Value& v) {
    v.print(out);
    return out;
}

inline std::string tuple_to_string(const Tuple& t) {
    std::ostringstream out;
    out << '(';
    for (size_t i = 0; i < t.size(); ++i) {
        if (i) out << ", ";
        out << t[i];
    }
    out << ')';
    return out.str();
}

// Arithmetic with int/float promotion. Division always yields a double,
// mod is integer-only. Failure (non-numeric operand) is a goal failure,
// not an error, so results are optional.
inline std::optional<Value> arith(const std::string& op, const Value& a, const Value& b) {
    if (!a.is_numeric() || !b.is_numeric()) return std::nullopt;
    if (op == "/") {
        double d = b.as_double();
        if (d == 0) return std::nullopt;
        return Value::real(a.as_double() / d);
    }
    if (a.is_int() && b.is_int()) {
        if (op == "+") return Value::integer(mpz_class(a.num() + b.num()));
        if (op == "-") return Value::integer(mpz_class(a.num() - b.num()));
        if (op == "*") return Value::integer(mpz_class(a.num() * b.num()));
        if (op == "mod") {
            if (b.num() == 0) return std::nullopt;
            mpz_class r;
            mpz_mod(r.get_mpz_t(), a.num().get_mpz_t(), b.num().get_mpz_t());
            return Value::integer(r);
        }
        return std::nullopt;
    }
    double x = a.as_double(), y = b.as_double();
    if (op == "+") return Value::real(x + y);
    if (op == "-") return Value::real(x - y);
    if (op == "*") return Value::real(x * y);
    return std::nullopt;
}

// Comparison used by comparison literals: numerics promote, other kinds
// compare structurally (only =/~= are meaningful across kinds).
inline std::optional<bool> compare_values(const std::string& op, const Value& a, const Value& b) {
    int c;
    if (a.is_numeric() && b.is_numeric()) {
        if (a.is_int() && b.is_int())
            c = a.compare(b);
        else {
            double x = a.as_double(), y = b.as_double();
            c = x < y ? -1 : (x > y ? 1 : 0);
        }
    } else if (a.kind() == b.kind()) {
        c = a.compare(b);
    } else {
        if (op == "=") return false;
        if (op == "~=") return true;
        return std::nullopt;
    }
    if (op == "=") return c == 0;
    if (op == "~=") return c != 0;
    if (op == "<") return c < 0;
    if (op == "<=") return c <= 0;
    if (op == ">") return c > 0;
    if (op == ">=") return c >= 0;
    return std::nullopt;
}

}  // namespace ldl
