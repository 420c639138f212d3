#pragma once

// Opcode-frequency features: trace parsing, the 140-slot layout (individual
// mnemonics plus instruction-group totals), min-max scaling, dataset CSV I/O
// and a synthetic labeled trace generator.

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "evrdf/common.hpp"

namespace evrdf::features {

inline constexpr std::size_t kFeatureCount = 140;
inline constexpr int kLabelRansomware = 0;
inline constexpr int kLabelNormal = 1;

struct InstructionTrace {
    std::vector<std::string> mnemonics;
    /// Non-blank, non-comment lines without a usable mnemonic.
    std::size_t skipped_lines = 0;

    friend bool operator==(const InstructionTrace&, const InstructionTrace&) = default;
};

/// Slot ordering for feature vectors: `mnemonic_slots` first, then `group_slots`.
/// `group_of` may map extra mnemonics that have no individual slot; anything
/// unmapped falls into the catch-all group.
class FeatureLayout {
public:
    FeatureLayout() = default;

    FeatureLayout(std::vector<std::string> groups, std::vector<std::pair<std::string, std::string>> slots,
                  std::vector<std::pair<std::string, std::string>> aliases, std::string catch_all = "misc")
        : groups_(std::move(groups)), catch_all_(std::move(catch_all)) {
        std::map<std::string, int> group_index;
        for (std::size_t i = 0; i < groups_.size(); ++i) {
            if (!group_index.emplace(groups_[i], static_cast<int>(i)).second)
                throw DataError("layout: duplicate group '" + groups_[i] + "'");
        }
        const auto find_group = [&](const std::string& g) {
            const auto it = group_index.find(g);
            if (it == group_index.end()) throw DataError("layout: undeclared group '" + g + "'");
            return it->second;
        };
        catch_all_group_ = find_group(catch_all_);
        for (const auto& [m, g] : slots) {
            const int gi = find_group(g);
            if (!lookup_.emplace(m, Entry{static_cast<int>(slots_.size()), gi}).second)
                throw DataError("layout: duplicate mnemonic '" + m + "'");
            slots_.push_back(m);
            slot_group_.push_back(gi);
        }
        for (const auto& [m, g] : aliases) {
            if (!lookup_.emplace(m, Entry{-1, find_group(g)}).second)
                throw DataError("layout: duplicate mnemonic '" + m + "'");
            aliases_.emplace_back(m, g);
        }
        if (slots_.size() + groups_.size() != kFeatureCount)
            throw DataError("layout: " + std::to_string(slots_.size()) + " mnemonic slots + " +
                            std::to_string(groups_.size()) + " group slots != " + std::to_string(kFeatureCount));
    }

    static const FeatureLayout& default_layout();

    std::size_t size() const { return slots_.size() + groups_.size(); }
    const std::vector<std::string>& mnemonic_slots() const { return slots_; }
    const std::vector<std::string>& group_slots() const { return groups_; }
    const std::string& catch_all() const { return catch_all_; }
    const std::vector<std::pair<std::string, std::string>>& aliases() const { return aliases_; }

    /// Feature index of a group's total.
    std::size_t group_feature(std::size_t group) const { return slots_.size() + group; }
    std::size_t group_feature(std::string_view name) const {
        const auto it = std::find(groups_.begin(), groups_.end(), name);
        if (it == groups_.end()) throw DataError("layout: unknown group '" + std::string(name) + "'");
        return group_feature(static_cast<std::size_t>(it - groups_.begin()));
    }
    /// Feature index of a mnemonic's individual slot, or -1.
    int slot_of(std::string_view mnemonic) const {
        const auto it = lookup_.find(std::string(mnemonic));
        return it == lookup_.end() ? -1 : it->second.slot;
    }
    std::size_t group_index_of(std::string_view mnemonic) const {
        const auto it = lookup_.find(std::string(mnemonic));
        return static_cast<std::size_t>(it == lookup_.end() ? catch_all_group_ : it->second.group);
    }
    std::size_t slot_group(std::size_t slot) const { return static_cast<std::size_t>(slot_group_[slot]); }

    std::string feature_name(std::size_t i) const {
        return i < slots_.size() ? slots_[i] : "group:" + groups_[i - slots_.size()];
    }

    friend bool operator==(const FeatureLayout& a, const FeatureLayout& b) {
        return a.groups_ == b.groups_ && a.slots_ == b.slots_ && a.slot_group_ == b.slot_group_ &&
               a.aliases_ == b.aliases_ && a.catch_all_ == b.catch_all_;
    }

private:
    struct Entry {
        int slot;
        int group;
    };

    std::vector<std::string> groups_;
    std::vector<std::string> slots_;
    std::vector<int> slot_group_;
    std::vector<std::pair<std::string, std::string>> aliases_;
    std::string catch_all_;
    int catch_all_group_ = 0;
    std::unordered_map<std::string, Entry> lookup_;
};

namespace detail {
struct GroupMembers {
    const char* group;
    const char* slots;
    const char* aliases;
};

// 132 slotted mnemonics in 8 groups; aliases count toward their group only.
inline constexpr std::array<GroupMembers, 8> kDefaultGroups{{
    {"data_transfer",
     "mov movzx movsx movsxd lea xchg bswap cbw cwde cdq cqo cmove cmovne cmovb cmovae cmova cmovl cmovg "
     "cmovle movd movq movaps movups movdqa movdqu movss lahf sete setne setb seta",
     "sahf xlatb cmovbe cmovge cmovs cmovns movapd movupd movlps movhps setbe setl setg"},
    {"arithmetic",
     "add sub adc sbb inc dec neg mul imul div idiv cmp xadd cmpxchg paddd paddq psubd addss addsd subsd "
     "mulsd divsd",
     "psubq pmuludq pmulld addps subps mulps divps cmpxchg8b cmpxchg16b daa das aaa aas"},
    {"logical", "and or xor not test bt bts btr btc bsf bsr popcnt lzcnt tzcnt pxor pand por pandn xorps andps",
     "aesenc aesenclast aesdec aesdeclast aeskeygenassist pclmulqdq sha1rnds4 sha256rnds2 orps andnps"},
    {"shift", "shl shr sar rol ror rcl rcr shld shrd psllq psrlq pslld psrld pslldq psrldq",
     "sal sarx shlx shrx rorx psraw psrad"},
    {"control_transfer", "jmp je jne jb jae ja jbe jl jge jg jle js jns jo jp call ret loop int syscall",
     "jnp jecxz jrcxz jno loope loopne iret sysenter"},
    {"string", "movsb movsw movsd stosb stosw stosd lodsb lodsd scasb cmpsb rep repne",
     "movsq stosq lodsq lodsw scasw scasd cmpsw cmpsd repe"},
    {"stack", "push pop pushfd popfd enter leave", "pushad popad pushfq popfq"},
    {"misc", "nop cpuid rdtsc hlt int3 pause", "lfence mfence sfence rdrand ud2 fwait clflush prefetcht0"},
}};

inline std::vector<std::string> split_words(std::string_view s) {
    std::vector<std::string> out;
    std::istringstream is{std::string(s)};
    for (std::string w; is >> w;) out.push_back(w);
    return out;
}
}  // namespace detail

inline const FeatureLayout& FeatureLayout::default_layout() {
    static const FeatureLayout layout = [] {
        std::vector<std::string> groups;
        std::vector<std::pair<std::string, std::string>> slots, aliases;
        for (const auto& g : detail::kDefaultGroups) {
            groups.emplace_back(g.group);
            for (auto& m : detail::split_words(g.slots)) slots.emplace_back(std::move(m), g.group);
            for (auto& m : detail::split_words(g.aliases)) aliases.emplace_back(std::move(m), g.group);
        }
        return FeatureLayout(std::move(groups), std::move(slots), std::move(aliases), "misc");
    }();
    return layout;
}

/// Manifest format:
///
///   # comment
///   [groups]
///   data_transfer
///   ...
///   misc *            <- '*' marks the catch-all group
///   [slots]
///   mov,data_transfer    (order defines feature indices)
///   [aliases]
///   aesenc,logical
inline void write_layout(std::ostream& os, const FeatureLayout& layout) {
    os << "# opcode feature layout: " << layout.mnemonic_slots().size() << " mnemonic slots + "
       << layout.group_slots().size() << " group slots\n";
    os << "[groups]\n";
    for (const auto& g : layout.group_slots()) os << g << (g == layout.catch_all() ? " *" : "") << '\n';
    os << "[slots]\n";
    for (std::size_t i = 0; i < layout.mnemonic_slots().size(); ++i)
        os << layout.mnemonic_slots()[i] << ',' << layout.group_slots()[layout.slot_group(i)] << '\n';
    os << "[aliases]\n";
    for (const auto& [m, g] : layout.aliases()) os << m << ',' << g << '\n';
}

inline FeatureLayout read_layout(std::istream& is, const std::string& origin = "layout") {
    enum class Section { None, Groups, Slots, Aliases } section = Section::None;
    std::vector<std::string> groups;
    std::vector<std::pair<std::string, std::string>> slots, aliases;
    std::string catch_all;
    std::string line;
    std::size_t lineno = 0;
    const auto fail = [&](const std::string& msg) {
        throw DataError(origin + ":" + std::to_string(lineno) + ": " + msg);
    };
    while (std::getline(is, line)) {
        ++lineno;
        const auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        if (t == "[groups]") { section = Section::Groups; continue; }
        if (t == "[slots]") { section = Section::Slots; continue; }
        if (t == "[aliases]") { section = Section::Aliases; continue; }
        switch (section) {
            case Section::None: fail("entry before any [section] header");
            case Section::Groups: {
                std::string name(t);
                if (name.size() > 1 && name.back() == '*') {
                    name = std::string(trim(std::string_view(name).substr(0, name.size() - 1)));
                    if (!catch_all.empty()) fail("more than one catch-all group");
                    catch_all = name;
                }
                groups.push_back(name);
                break;
            }
            case Section::Slots:
            case Section::Aliases: {
                const auto comma = t.find(',');
                if (comma == std::string_view::npos) fail("expected 'mnemonic,group'");
                std::string m(trim(t.substr(0, comma)));
                std::string g(trim(t.substr(comma + 1)));
                if (m.empty() || g.empty()) fail("empty mnemonic or group");
                std::transform(m.begin(), m.end(), m.begin(), [](unsigned char c) { return std::tolower(c); });
                (section == Section::Slots ? slots : aliases).emplace_back(std::move(m), std::move(g));
                break;
            }
        }
    }
    if (catch_all.empty()) catch_all = "misc";
    try {
        return FeatureLayout(std::move(groups), std::move(slots), std::move(aliases), catch_all);
    } catch (const DataError& e) {
        throw DataError(origin + ": " + e.what());
    }
}

inline FeatureLayout load_layout(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open layout file " + path);
    return read_layout(in, path);
}

/// Line-oriented trace: first whitespace-delimited token of each line is the
/// mnemonic. Blank lines and '#' comments are ignored.
inline InstructionTrace parse_trace(std::istream& is) {
    InstructionTrace trace;
    std::string line;
    while (std::getline(is, line)) {
        const auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto end = t.find_first_of(" \t");
        std::string m(t.substr(0, end));
        bool ok = !m.empty();
        for (auto& c : m) {
            const auto uc = static_cast<unsigned char>(c);
            if (!(std::isalnum(uc) || c == '_' || c == '.')) ok = false;
            c = static_cast<char>(std::tolower(uc));
        }
        if (!ok) {
            ++trace.skipped_lines;
            continue;
        }
        trace.mnemonics.push_back(std::move(m));
    }
    return trace;
}

inline InstructionTrace parse_trace(std::string_view text) {
    std::istringstream is{std::string(text)};
    return parse_trace(is);
}

inline InstructionTrace load_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open trace file " + path);
    return parse_trace(in);
}

struct FeatureVector {
    std::vector<double> values;
    int label = kLabelNormal;

    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

/// Raw counts: individual slots for known mnemonics, group totals for all.
inline std::vector<double> featurize(const InstructionTrace& trace, const FeatureLayout& layout) {
    std::vector<double> v(layout.size(), 0.0);
    const std::size_t n_slots = layout.mnemonic_slots().size();
    for (const auto& m : trace.mnemonics) {
        const int slot = layout.slot_of(m);
        if (slot >= 0) v[static_cast<std::size_t>(slot)] += 1.0;
        v[n_slots + layout.group_index_of(m)] += 1.0;
    }
    return v;
}

struct Dataset {
    std::vector<FeatureVector> rows;
    FeatureLayout layout = FeatureLayout::default_layout();

    std::size_t size() const { return rows.size(); }
    std::size_t count_label(int label) const {
        return static_cast<std::size_t>(
            std::count_if(rows.begin(), rows.end(), [&](const FeatureVector& r) { return r.label == label; }));
    }
    std::vector<int> labels() const {
        std::vector<int> out;
        out.reserve(rows.size());
        for (const auto& r : rows) out.push_back(r.label);
        return out;
    }
    Dataset subset(const std::vector<std::size_t>& indices) const {
        Dataset d;
        d.layout = layout;
        d.rows.reserve(indices.size());
        for (auto i : indices) d.rows.push_back(rows.at(i));
        return d;
    }

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

// ---------------------------------------------------------------------------
// Scaling

enum class ScalerKind { MinMax, Standard };

struct ScalerParams {
    ScalerKind kind = ScalerKind::MinMax;
    std::vector<double> min;
    std::vector<double> max;
    std::vector<double> mean;    ///< Standard only
    std::vector<double> stddev;  ///< Standard only

    std::size_t size() const { return min.size(); }

    friend bool operator==(const ScalerParams&, const ScalerParams&) = default;
};

inline ScalerParams fit_scaler(const Dataset& data, ScalerKind kind = ScalerKind::MinMax) {
    if (data.rows.empty()) throw DataError("fit_scaler: empty dataset");
    const std::size_t d = data.rows.front().values.size();
    ScalerParams p;
    p.kind = kind;
    p.min.assign(d, std::numeric_limits<double>::infinity());
    p.max.assign(d, -std::numeric_limits<double>::infinity());
    std::vector<double> sum(d, 0.0), sq(d, 0.0);
    for (const auto& r : data.rows) {
        if (r.values.size() != d) throw ShapeError("fit_scaler: ragged rows");
        for (std::size_t j = 0; j < d; ++j) {
            p.min[j] = std::min(p.min[j], r.values[j]);
            p.max[j] = std::max(p.max[j], r.values[j]);
            sum[j] += r.values[j];
        }
    }
    if (kind == ScalerKind::Standard) {
        const double n = static_cast<double>(data.rows.size());
        p.mean.resize(d);
        p.stddev.resize(d);
        for (std::size_t j = 0; j < d; ++j) p.mean[j] = sum[j] / n;
        for (const auto& r : data.rows)
            for (std::size_t j = 0; j < d; ++j) sq[j] += (r.values[j] - p.mean[j]) * (r.values[j] - p.mean[j]);
        for (std::size_t j = 0; j < d; ++j) p.stddev[j] = std::sqrt(sq[j] / n);
    }
    return p;
}

/// Min-max: (v - min) / (max - min) clamped to [0, 1]; constant features map to 0.
inline std::vector<double> apply_scaler(const ScalerParams& p, const std::vector<double>& v) {
    if (v.size() != p.size())
        throw ShapeError("apply_scaler: vector has " + std::to_string(v.size()) + " values, scaler expects " +
                         std::to_string(p.size()));
    std::vector<double> out(v.size());
    for (std::size_t j = 0; j < v.size(); ++j) {
        if (p.kind == ScalerKind::Standard) {
            out[j] = p.stddev[j] > 0.0 ? (v[j] - p.mean[j]) / p.stddev[j] : 0.0;
            continue;
        }
        const double range = p.max[j] - p.min[j];
        out[j] = range > 0.0 ? std::clamp((v[j] - p.min[j]) / range, 0.0, 1.0) : 0.0;
    }
    return out;
}

inline Dataset apply_scaler(const ScalerParams& p, const Dataset& data) {
    Dataset out = data;
    for (auto& r : out.rows) r.values = apply_scaler(p, r.values);
    return out;
}

inline nlohmann::json to_json(const ScalerParams& p) {
    nlohmann::json j;
    j["kind"] = p.kind == ScalerKind::MinMax ? "minmax" : "standard";
    j["min"] = p.min;
    j["max"] = p.max;
    if (p.kind == ScalerKind::Standard) {
        j["mean"] = p.mean;
        j["stddev"] = p.stddev;
    }
    return j;
}

inline ScalerParams scaler_from_json(const nlohmann::json& j) {
    ScalerParams p;
    try {
        const auto kind = j.at("kind").get<std::string>();
        if (kind != "minmax" && kind != "standard") throw DataError("scaler: unknown kind '" + kind + "'");
        p.kind = kind == "minmax" ? ScalerKind::MinMax : ScalerKind::Standard;
        p.min = j.at("min").get<std::vector<double>>();
        p.max = j.at("max").get<std::vector<double>>();
        if (p.kind == ScalerKind::Standard) {
            p.mean = j.at("mean").get<std::vector<double>>();
            p.stddev = j.at("stddev").get<std::vector<double>>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("scaler: ") + e.what());
    }
    if (p.min.size() != p.max.size()) throw DataError("scaler: min/max length mismatch");
    for (std::size_t i = 0; i < p.min.size(); ++i)
        if (p.max[i] < p.min[i]) throw DataError("scaler: max < min at feature " + std::to_string(i));
    return p;
}

// ---------------------------------------------------------------------------
// Dataset CSV: header f0..f139,label

class CsvError : public DataError {
public:
    CsvError(const std::string& origin, std::size_t row, std::size_t column, const std::string& msg)
        : DataError(origin + ": row " + std::to_string(row) + ", column " + std::to_string(column) + ": " + msg),
          row_(row),
          column_(column) {}

    std::size_t row() const { return row_; }
    std::size_t column() const { return column_; }

private:
    std::size_t row_;
    std::size_t column_;
};

inline void write_csv(std::ostream& os, const Dataset& d) {
    const std::size_t n = d.layout.size();
    for (std::size_t j = 0; j < n; ++j) os << 'f' << j << ',';
    os << "label\n";
    for (const auto& r : d.rows) {
        if (r.values.size() != n) throw ShapeError("write_csv: row length does not match layout");
        for (double v : r.values) os << format_double(v) << ',';
        os << r.label << '\n';
    }
}

inline void write_csv(const Dataset& d, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    write_csv(out, d);
}

/// Rows and columns in errors are 1-based; row 1 is the header.
inline Dataset read_csv(std::istream& is, const FeatureLayout& layout, const std::string& origin = "csv") {
    const std::size_t n = layout.size();
    const auto split = [](std::string_view line) {
        std::vector<std::string_view> cells;
        std::size_t start = 0;
        while (true) {
            const auto comma = line.find(',', start);
            cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? comma : comma - start)));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        return cells;
    };

    Dataset d;
    d.layout = layout;
    std::string line;
    std::size_t row = 0;
    if (!std::getline(is, line)) throw CsvError(origin, 1, 1, "missing header");
    ++row;
    {
        const auto header = split(trim(line));
        if (header.size() != n + 1)
            throw CsvError(origin, row, std::min(header.size(), n + 1),
                           "layout mismatch: header has " + std::to_string(header.size()) + " columns, expected " +
                               std::to_string(n + 1));
        for (std::size_t j = 0; j < n; ++j)
            if (header[j] != "f" + std::to_string(j))
                throw CsvError(origin, row, j + 1, "layout mismatch: expected header 'f" + std::to_string(j) + "'");
        if (header[n] != "label") throw CsvError(origin, row, n + 1, "layout mismatch: expected header 'label'");
    }
    while (std::getline(is, line)) {
        ++row;
        const auto t = trim(line);
        if (t.empty()) continue;
        const auto cells = split(t);
        if (cells.size() != n + 1)
            throw CsvError(origin, row, cells.size(),
                           "wrong column count " + std::to_string(cells.size()) + ", expected " +
                               std::to_string(n + 1));
        FeatureVector fv;
        fv.values.resize(n);
        for (std::size_t j = 0; j < n; ++j) {
            const auto c = cells[j];
            const auto res = std::from_chars(c.data(), c.data() + c.size(), fv.values[j]);
            if (res.ec != std::errc() || res.ptr != c.data() + c.size() || !std::isfinite(fv.values[j]))
                throw CsvError(origin, row, j + 1, "non-numeric cell '" + std::string(c) + "'");
        }
        const auto lc = cells[n];
        int label = -1;
        const auto res = std::from_chars(lc.data(), lc.data() + lc.size(), label);
        if (res.ec != std::errc() || res.ptr != lc.data() + lc.size())
            throw CsvError(origin, row, n + 1, "non-numeric label '" + std::string(lc) + "'");
        if (label != kLabelRansomware && label != kLabelNormal)
            throw CsvError(origin, row, n + 1, "label must be 0 (ransomware) or 1 (normal), got " + std::to_string(label));
        fv.label = label;
        d.rows.push_back(std::move(fv));
    }
    return d;
}

inline Dataset read_csv(const std::string& path, const FeatureLayout& layout) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    return read_csv(in, layout, path);
}

// ---------------------------------------------------------------------------
// Synthetic corpus

struct LabeledTrace {
    InstructionTrace trace;
    int label = kLabelNormal;
};

struct SynthOptions {
    double min_length = 1000.0;
    double max_length = 8000.0;
    double profile_noise = 0.35;  ///< log-normal sigma on per-sample mnemonic weights
};

namespace detail {

// Ransomware-like profile lives on logical/shift/string and crypto-adjacent
// arithmetic; normal-like on data transfer, control flow and stack. The two
// supports are disjoint.
inline bool in_ransomware_support(std::string_view group, std::string_view m) {
    if (group == "logical" || group == "shift" || group == "string") return true;
    if (group == "arithmetic")
        return m == "add" || m == "sub" || m == "adc" || m == "inc" || m == "dec" || m == "mul" || m == "imul" ||
               m == "paddd" || m == "paddq" || m == "psubd" || m == "pmuludq" || m == "pmulld" || m == "psubq";
    return false;
}

inline std::vector<double> zipf_weights(std::size_t n, Rng& rng) {
    std::vector<std::size_t> rank(n);
    for (std::size_t i = 0; i < n; ++i) rank[i] = i;
    shuffle(rank, rng);
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 / std::pow(static_cast<double>(rank[i] + 1), 0.9);
    return w;
}

inline void normalize(std::vector<double>& w) {
    double s = 0.0;
    for (double x : w) s += x;
    if (s > 0.0)
        for (double& x : w) x /= s;
}

}  // namespace detail

/// Generates `n_ransomware` label-0 traces followed by `n_normal` label-1 traces.
///
/// Each sample draws from (1 - separation) * shared + separation * class
/// profile, with per-sample log-normal jitter on the weights and a
/// log-uniform trace length. separation = 1 gives disjoint mnemonic supports,
/// separation = 0 identical class distributions.
inline std::vector<LabeledTrace> synth_traces(std::size_t n_ransomware, std::size_t n_normal,
                                              const FeatureLayout& layout, double separation, std::uint64_t seed,
                                              const SynthOptions& opt = {}) {
    if (n_ransomware == 0 || n_normal == 0) throw ConfigError("synth: class counts must be > 0");
    if (!(separation >= 0.0 && separation <= 1.0)) throw ConfigError("synth: separation must be in [0, 1]");
    if (!(opt.min_length >= 1.0 && opt.max_length >= opt.min_length))
        throw ConfigError("synth: invalid trace length range");

    std::vector<std::string> vocab = layout.mnemonic_slots();
    for (const auto& a : layout.aliases()) vocab.push_back(a.first);
    const std::size_t v = vocab.size();

    Rng profile_rng(derive_seed(seed, 0));
    std::vector<double> shared = detail::zipf_weights(v, profile_rng);
    std::vector<double> ransom = detail::zipf_weights(v, profile_rng);
    std::vector<double> normal = detail::zipf_weights(v, profile_rng);
    for (std::size_t i = 0; i < v; ++i) {
        const auto& group = layout.group_slots()[layout.group_index_of(vocab[i])];
        if (detail::in_ransomware_support(group, vocab[i]))
            normal[i] = 0.0;
        else
            ransom[i] = 0.0;
    }
    detail::normalize(shared);
    detail::normalize(ransom);
    detail::normalize(normal);

    std::vector<LabeledTrace> out;
    out.reserve(n_ransomware + n_normal);
    Rng rng(derive_seed(seed, 1));
    std::vector<double> cdf(v);
    for (std::size_t s = 0; s < n_ransomware + n_normal; ++s) {
        const bool is_ransom = s < n_ransomware;
        const auto& cls = is_ransom ? ransom : normal;
        double total = 0.0;
        for (std::size_t i = 0; i < v; ++i) {
            const double base = (1.0 - separation) * shared[i] + separation * cls[i];
            total += base * std::exp(opt.profile_noise * standard_normal(rng));
            cdf[i] = total;
        }
        const double len_f =
            std::exp(uniform(rng, std::log(opt.min_length), std::log(opt.max_length)));
        const auto len = static_cast<std::size_t>(std::llround(len_f));
        LabeledTrace lt;
        lt.label = is_ransom ? kLabelRansomware : kLabelNormal;
        lt.trace.mnemonics.reserve(len);
        for (std::size_t k = 0; k < len; ++k) {
            const double u = unit_uniform(rng) * total;
            auto idx = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
            idx = std::min(idx, v - 1);
            // zero-weight entries share a cdf value with their predecessor and are never selected
            lt.trace.mnemonics.push_back(vocab[idx]);
        }
        out.push_back(std::move(lt));
    }
    return out;
}

inline Dataset featurize_all(const std::vector<LabeledTrace>& traces, const FeatureLayout& layout) {
    Dataset d;
    d.layout = layout;
    d.rows.reserve(traces.size());
    for (const auto& t : traces) d.rows.push_back({featurize(t.trace, layout), t.label});
    return d;
}

inline Dataset synth_corpus(std::size_t n_ransomware, std::size_t n_normal, const FeatureLayout& layout,
                            double separation, std::uint64_t seed, const SynthOptions& opt = {}) {
    return featurize_all(synth_traces(n_ransomware, n_normal, layout, separation, seed, opt), layout);
}

inline void write_trace(std::ostream& os, const InstructionTrace& trace) {
    for (const auto& m : trace.mnemonics) os << m << '\n';
}

}  // namespace evrdf::features
