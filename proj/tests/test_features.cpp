#include <gtest/gtest.h>

#include <map>
#include <set>
#include <sstream>

#include "evrdf/features.hpp"
#include "test_util.hpp"

using namespace evrdf;
using namespace evrdf::features;

namespace {

// Group-sum invariant on raw counts: group totals cover the whole trace and
// each total is at least the sum of its individually slotted members.
void expect_group_sums(const FeatureLayout& layout, const std::vector<double>& v, double length) {
    const std::size_t ns = layout.mnemonic_slots().size();
    std::vector<double> slotted(layout.group_slots().size(), 0.0);
    for (std::size_t i = 0; i < ns; ++i) slotted[layout.slot_group(i)] += v[i];
    double total = 0.0;
    for (std::size_t g = 0; g < slotted.size(); ++g) {
        EXPECT_GE(v[ns + g], slotted[g]);
        total += v[ns + g];
    }
    EXPECT_EQ(total, length);
}

}  // namespace

TEST(Layout, DefaultHas140Slots) {
    const auto& l = FeatureLayout::default_layout();
    EXPECT_EQ(l.size(), kFeatureCount);
    EXPECT_EQ(l.mnemonic_slots().size(), 132u);
    EXPECT_EQ(l.group_slots().size(), 8u);
    EXPECT_EQ(l.catch_all(), "misc");
    EXPECT_EQ(l.slot_of("mov"), 0);
    EXPECT_EQ(l.slot_of("aesenc"), -1);
    EXPECT_EQ(l.group_slots()[l.group_index_of("aesenc")], "logical");
    EXPECT_EQ(l.group_slots()[l.group_index_of("vfmadd231ps")], "misc");
    EXPECT_EQ(l.feature_name(132), "group:data_transfer");
}

TEST(Layout, ManifestRoundTrip) {
    const auto& l = FeatureLayout::default_layout();
    std::stringstream ss;
    write_layout(ss, l);
    EXPECT_EQ(read_layout(ss), l);
}

TEST(Layout, RejectsMalformedManifests) {
    const auto parse = [](const std::string& text) {
        std::istringstream is(text);
        return read_layout(is, "m");
    };
    EXPECT_THROW(parse("mov,data\n"), DataError);
    EXPECT_THROW(parse("[groups]\na *\nb *\n"), DataError);
    EXPECT_THROW(parse("[groups]\nmisc *\n[slots]\nmov\n"), DataError);
    EXPECT_THROW(parse("[groups]\nmisc *\n[slots]\nmov,nowhere\n"), DataError);
    EXPECT_THROW(parse("[groups]\nmisc *\n[slots]\nmov,misc\n"), DataError);  // 1 + 1 != 140
    std::ostringstream dup;
    write_layout(dup, FeatureLayout::default_layout());
    EXPECT_THROW(parse(dup.str() + "mov,misc\n"), DataError);
}

TEST(Trace, ParsesFirstTokenAndCountsJunk) {
    const auto t = parse_trace("# header\nMOV eax, ebx\n\n  xor eax,eax\n0x401000: ???\n  \tnop\n$$$\n");
    EXPECT_EQ(t.mnemonics, (std::vector<std::string>{"mov", "xor", "nop"}));
    EXPECT_EQ(t.skipped_lines, 2u);
}

TEST(Trace, EmptyTraceGivesZeroVector) {
    const auto v = featurize(parse_trace(""), FeatureLayout::default_layout());
    ASSERT_EQ(v.size(), kFeatureCount);
    for (double x : v) EXPECT_EQ(x, 0.0);
}

TEST(Featurize, CountsSlotsAliasesAndCatchAll) {
    const auto& l = FeatureLayout::default_layout();
    const auto v = featurize(parse_trace("mov\nmov\naesenc\nxor\nfoo\n"), l);
    EXPECT_EQ(v[l.slot_of("mov")], 2.0);
    EXPECT_EQ(v[l.slot_of("xor")], 1.0);
    EXPECT_EQ(v[l.group_feature("data_transfer")], 2.0);
    EXPECT_EQ(v[l.group_feature("logical")], 2.0);
    EXPECT_EQ(v[l.group_feature("misc")], 1.0);
    expect_group_sums(l, v, 5.0);
}

TEST(Featurize, GroupSumInvariantOnSyntheticTraces) {
    const auto& l = FeatureLayout::default_layout();
    const auto traces = synth_traces(20, 20, l, 0.5, 3, {50.0, 400.0, 0.35});
    for (const auto& t : traces) expect_group_sums(l, featurize(t.trace, l), static_cast<double>(t.trace.mnemonics.size()));
}

TEST(Synth, DeterministicAndLabelled) {
    const auto& l = FeatureLayout::default_layout();
    const auto a = synth_corpus(5, 4, l, 0.9, 42, {50.0, 200.0, 0.35});
    const auto b = synth_corpus(5, 4, l, 0.9, 42, {50.0, 200.0, 0.35});
    const auto c = synth_corpus(5, 4, l, 0.9, 43, {50.0, 200.0, 0.35});
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
    EXPECT_EQ(a.count_label(kLabelRansomware), 5u);
    EXPECT_EQ(a.count_label(kLabelNormal), 4u);
    EXPECT_EQ(a.rows.front().label, kLabelRansomware);
    EXPECT_THROW(synth_corpus(0, 4, l, 0.9, 1), ConfigError);
    EXPECT_THROW(synth_corpus(4, 4, l, 1.5, 1), ConfigError);
}

TEST(Synth, FullSeparationGivesDisjointSupports) {
    const auto& l = FeatureLayout::default_layout();
    const auto traces = synth_traces(10, 10, l, 1.0, 5, {100.0, 300.0, 0.35});
    std::set<std::string> ransom, normal;
    for (const auto& t : traces)
        for (const auto& m : t.trace.mnemonics) (t.label == kLabelRansomware ? ransom : normal).insert(m);
    for (const auto& m : ransom) EXPECT_EQ(normal.count(m), 0u) << m;
}

TEST(Scaler, MinMaxMapsIntoUnitInterval) {
    Dataset d;
    d.layout = FeatureLayout::default_layout();
    Rng rng(3);
    for (int i = 0; i < 30; ++i) {
        FeatureVector fv;
        for (std::size_t j = 0; j < kFeatureCount; ++j) fv.values.push_back(j == 7 ? 4.0 : std::floor(uniform(rng, 0, 100)));
        d.rows.push_back(fv);
    }
    const auto p = fit_scaler(d);
    const auto s = apply_scaler(p, d);
    for (const auto& r : s.rows)
        for (double v : r.values) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
    for (const auto& r : s.rows) EXPECT_EQ(r.values[7], 0.0);  // constant column

    std::vector<double> outside(kFeatureCount, 1e6);
    for (double v : apply_scaler(p, outside)) EXPECT_LE(v, 1.0);
    EXPECT_THROW(apply_scaler(p, std::vector<double>(3, 0.0)), ShapeError);
}

TEST(Scaler, JsonRoundTrip) {
    Dataset d = synth_corpus(3, 3, FeatureLayout::default_layout(), 0.9, 1, {50.0, 100.0, 0.35});
    for (auto kind : {ScalerKind::MinMax, ScalerKind::Standard}) {
        const auto p = fit_scaler(d, kind);
        EXPECT_EQ(scaler_from_json(nlohmann::json::parse(to_json(p).dump())), p);
    }
    EXPECT_THROW(scaler_from_json({{"kind", "robust"}, {"min", {0}}, {"max", {1}}}), DataError);
    EXPECT_THROW(scaler_from_json({{"kind", "minmax"}, {"min", {2}}, {"max", {1}}}), DataError);
    EXPECT_THROW(scaler_from_json({{"kind", "minmax"}}), DataError);
    EXPECT_THROW(fit_scaler(Dataset{}), DataError);
}

TEST(Csv, RoundTripIsExact) {
    auto d = synth_corpus(4, 4, FeatureLayout::default_layout(), 0.9, 9, {50.0, 300.0, 0.35});
    d = apply_scaler(fit_scaler(d), d);
    std::stringstream ss;
    write_csv(ss, d);
    const auto back = read_csv(ss, d.layout);
    EXPECT_EQ(back, d);
    std::stringstream again;
    write_csv(again, back);
    EXPECT_EQ(again.str(), ss.str());
}

TEST(Csv, ErrorsCarryRowAndColumn) {
    const auto& l = FeatureLayout::default_layout();
    std::ostringstream header;
    for (std::size_t j = 0; j < kFeatureCount; ++j) header << 'f' << j << ',';
    header << "label\n";
    const std::string zeros = [] {
        std::string s;
        for (std::size_t j = 0; j < kFeatureCount; ++j) s += "0,";
        return s;
    }();

    const auto expect_at = [&](const std::string& text, std::size_t row, std::size_t col) {
        std::istringstream is(text);
        try {
            read_csv(is, l);
            ADD_FAILURE() << "no error";
        } catch (const CsvError& e) {
            EXPECT_EQ(e.row(), row) << e.what();
            EXPECT_EQ(e.column(), col) << e.what();
        }
    };
    expect_at("", 1, 1);
    expect_at("f0,f1,label\n", 1, 3);
    expect_at(header.str() + zeros + "1\n" + "x," + zeros.substr(2) + "0\n", 3, 1);
    expect_at(header.str() + zeros + "2\n", 2, kFeatureCount + 1);
    expect_at(header.str() + zeros + "\n", 2, kFeatureCount + 1);
    expect_at(header.str() + "0,0\n", 2, 2);
    expect_at(header.str() + "nan," + zeros.substr(2) + "0\n", 2, 1);
}

TEST(Dataset, SubsetAndLabels) {
    const auto d = synth_corpus(3, 2, FeatureLayout::default_layout(), 0.9, 1, {50.0, 100.0, 0.35});
    const auto s = d.subset({4, 0});
    ASSERT_EQ(s.size(), 2u);
    EXPECT_EQ(s.labels(), (std::vector<int>{kLabelNormal, kLabelRansomware}));
    EXPECT_THROW(d.subset({5}), std::out_of_range);
}
