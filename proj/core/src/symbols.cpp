#include "dbmm/symbols.hpp"

#include <algorithm>
#include <cctype>

#include "dbmm/errors.hpp"

namespace dbmm {

std::string SymbolKey::display() const {
    if (parts.empty()) return "{}";
    if (parts.size() == 1) return parts[0];
    std::string out = "(";
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += ",";
        out += parts[i];
    }
    out += ")";
    return out;
}

std::size_t SymbolKeyHash::operator()(const SymbolKey& k) const {
    std::size_t h = 1469598103934665603ull;
    for (const auto& p : k.parts) {
        for (char c : p) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ull;
        }
        h ^= 0x1f;  // part separator
        h *= 1099511628211ull;
    }
    return h;
}

SymbolId SymbolTable::intern(SymbolKey key) {
    auto it = index_.find(key);
    if (it != index_.end()) return it->second;
    SymbolId id = static_cast<SymbolId>(keys_.size());
    index_.emplace(key, id);
    keys_.push_back(std::move(key));
    return id;
}

SymbolId SymbolTable::intern(std::string single_part) {
    return intern(SymbolKey{{std::move(single_part)}});
}

SymbolId SymbolTable::intern_pair(const std::string& a, const std::string& b) {
    return intern(SymbolKey{{a, b}});
}

SymbolId SymbolTable::find(const SymbolKey& key) const {
    auto it = index_.find(key);
    return it == index_.end() ? kNoSymbol : it->second;
}

const SymbolKey& SymbolTable::key(SymbolId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= keys_.size())
        throw Error("symbol id out of range: " + std::to_string(id));
    return keys_[static_cast<std::size_t>(id)];
}

namespace {

// Strips an integer/fraction decimal down to canonical form.
std::string canonical_from_pieces(bool negative, std::string int_part, std::string frac_part) {
    std::size_t nz = int_part.find_first_not_of('0');
    int_part = nz == std::string::npos ? "0" : int_part.substr(nz);
    while (!frac_part.empty() && frac_part.back() == '0') frac_part.pop_back();
    std::string out = int_part;
    if (!frac_part.empty()) out += "." + frac_part;
    if (negative && out != "0") out.insert(out.begin(), '-');
    return out;
}

}  // namespace

std::string normalize_decimal(const std::string& text) {
    std::size_t i = 0;
    bool negative = false;
    if (i < text.size() && (text[i] == '+' || text[i] == '-')) {
        negative = text[i] == '-';
        ++i;
    }
    std::string int_part, frac_part;
    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) int_part += text[i++];
    if (i < text.size() && text[i] == '.') {
        ++i;
        while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) frac_part += text[i++];
    }
    if (int_part.empty() && frac_part.empty())
        throw DataError("not a decimal number: '" + text + "'");

    long exponent = 0;
    if (i < text.size() && (text[i] == 'e' || text[i] == 'E')) {
        ++i;
        bool exp_neg = false;
        if (i < text.size() && (text[i] == '+' || text[i] == '-')) {
            exp_neg = text[i] == '-';
            ++i;
        }
        std::string digits;
        while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) digits += text[i++];
        if (digits.empty() || digits.size() > 6)
            throw DataError("bad exponent in decimal: '" + text + "'");
        exponent = std::stol(digits) * (exp_neg ? -1 : 1);
    }
    if (i != text.size())
        throw DataError("trailing characters in decimal: '" + text + "'");

    // Shift the decimal point by the exponent.
    while (exponent > 0) {
        if (frac_part.empty()) {
            int_part += '0';
        } else {
            int_part += frac_part.front();
            frac_part.erase(frac_part.begin());
        }
        --exponent;
    }
    while (exponent < 0) {
        if (int_part.empty()) {
            frac_part.insert(frac_part.begin(), '0');
        } else {
            frac_part.insert(frac_part.begin(), int_part.back());
            int_part.pop_back();
        }
        ++exponent;
    }
    return canonical_from_pieces(negative, int_part, frac_part);
}

}  // namespace dbmm
