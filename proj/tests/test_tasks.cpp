#include "support.hpp"

using namespace randenc;
using namespace testing_support;

namespace {

std::string message_of(const std::function<void()>& f)
{
    try {
        f();
    } catch (const std::exception& e) {
        return e.what();
    }
    return {};
}

bool same_dataset(const TaskDataset& a, const TaskDataset& b)
{
    if (a.name != b.name || a.kind != b.kind || a.classes != b.classes || a.examples.size() != b.examples.size())
        return false;
    for (std::size_t i = 0; i < a.examples.size(); ++i) {
        const auto &x = a.examples[i], &y = b.examples[i];
        if (x.text != y.text || x.text2 != y.text2 || x.label != y.label) return false;
        if (x.tree.has_value() != y.tree.has_value()) return false;
        if (x.tree && x.tree->leaves != y.tree->leaves) return false;
    }
    const auto* sa = std::get_if<ExplicitSplits>(&a.splits);
    const auto* sb = std::get_if<ExplicitSplits>(&b.splits);
    if (sa && sb) return sa->train == sb->train && sa->dev == sb->dev && sa->test == sb->test;
    return std::get<CrossValidation>(a.splits).folds == std::get<CrossValidation>(b.splits).folds;
}

}  // namespace

TEST(LoadTask, FourLineSingleSentenceFile)
{
    TempDir dir;
    dir.write("data.tsv", "pos\ta fine film\nneg\ta dull film\npos\tgreat\nneg\tbad\n");
    const auto manifest = dir.write("task.manifest", "name=toy\nkind=single\ndata=data.tsv\nsplit=cv2\n");
    const auto ds = load_task(manifest);
    EXPECT_EQ(ds.name, "toy");
    EXPECT_EQ(ds.examples.size(), 4u);
    EXPECT_EQ(ds.classes, (std::vector<std::string>{"pos", "neg"}));
    EXPECT_EQ(ds.labels(), (std::vector<std::size_t>{0, 1, 0, 1}));
    EXPECT_EQ(std::get<CrossValidation>(ds.splits).folds, 2u);
}

TEST(LoadTask, ExplicitSplitsAreDisjoint)
{
    TempDir dir;
    dir.write("train.tsv", "a\tone\nb\ttwo\na\tthree\n");
    dir.write("dev.tsv", "b\tfour\n");
    dir.write("test.tsv", "a\tfive\nb\tsix\n");
    const auto ds = load_task(dir.write("t.manifest", "kind=single\ntrain=train.tsv\ndev=dev.tsv\ntest=test.tsv\n"));
    EXPECT_EQ(ds.name, "t");
    const auto& s = std::get<ExplicitSplits>(ds.splits);
    EXPECT_EQ(s.train, (std::vector<std::size_t>{0, 1, 2}));
    EXPECT_EQ(s.dev, (std::vector<std::size_t>{3}));
    EXPECT_EQ(s.test, (std::vector<std::size_t>{4, 5}));
}

TEST(LoadTask, PairLineMissingSecondTextNamesTheLine)
{
    TempDir dir;
    dir.write("pairs.tsv", "1\ta\tb\n0\tc\td\n1\tonly one\n");
    const auto manifest = dir.write("p.manifest", "kind=pair\ndata=pairs.tsv\nsplit=cv2\n");
    const std::string msg = message_of([&] { load_task(manifest); });
    EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
}

TEST(LoadTask, TooFewExamplesForFolds)
{
    TempDir dir;
    dir.write("d.tsv", "a\t1\nb\t2\na\t3\nb\t4\na\t5\n");
    EXPECT_THROW(load_task(dir.write("m", "kind=single\ndata=d.tsv\nsplit=cv10\n")), config_error);
}

TEST(LoadTask, ManifestErrors)
{
    TempDir dir;
    dir.write("d.tsv", "a\t1\nb\t2\n");
    EXPECT_THROW(load_task(dir.write("k", "kind=triple\ndata=d.tsv\nsplit=cv2\n")), config_error);
    EXPECT_THROW(load_task(dir.write("f", "kind=single\ndata=missing.tsv\nsplit=cv2\n")), error);
    EXPECT_THROW(load_task(dir.write("u", "kind=single\ndata=d.tsv\nsplit=cv2\ncolour=red\n")), parse_error);
    EXPECT_THROW(load_task(dir.path() / "no_manifest"), error);

    dir.write("one.tsv", "a\t1\na\t2\n");
    EXPECT_THROW(load_task(dir.write("c", "kind=single\ndata=one.tsv\nsplit=cv2\n")), config_error);

    dir.write("tr.tsv", "a\t1\nb\t2\n");
    dir.write("te.tsv", "c\t3\n");
    const std::string msg = message_of([&] { load_task(dir.write("x", "kind=single\ntrain=tr.tsv\ntest=te.tsv\n")); });
    EXPECT_NE(msg.find("'c'"), std::string::npos) << msg;
}

TEST(LoadTask, TreesAttachInFileOrder)
{
    TempDir dir;
    dir.write("tr.tsv", "a\tThe cat\nb\tA dog\n");
    dir.write("te.tsv", "a\tOne bird\n");
    dir.write("trees.txt", "(S (NP The) (NN cat))\n(S (DT A) (NN dog))\n(S (CD One) (NN bird))\n");
    const auto ds = load_task(dir.write("m", "kind=single\ntrain=tr.tsv\ntest=te.tsv\ntrees=trees.txt\n"));
    EXPECT_TRUE(ds.has_trees());
    EXPECT_EQ(ds.examples[2].tree->leaves, (std::vector<std::string>{"one", "bird"}));

    dir.write("short.txt", "(S (NP The) (NN cat))\n");
    EXPECT_THROW(load_task(dir.write("m2", "kind=single\ntrain=tr.tsv\ntest=te.tsv\ntrees=short.txt\n")), parse_error);
}

TEST(LoadTask, ReloadIsStable)
{
    TempDir dir;
    dir.write("d.tsv", "x\tsome text\ny\tother text\nx\tmore\ny\tless\n");
    const auto m = dir.write("m", "name=r\nkind=single\ndata=d.tsv\nsplit=cv2\n");
    EXPECT_TRUE(same_dataset(load_task(m), load_task(m)));
}

TEST(SyntheticTask, LabelRule)
{
    const std::string a{synthetic_marker_a}, b{synthetic_marker_b};
    EXPECT_TRUE(marker_a_precedes_b({"x", a, "y", b}));
    EXPECT_FALSE(marker_a_precedes_b({b, a}));
    EXPECT_TRUE(marker_a_precedes_b({b, a, b}));
    EXPECT_FALSE(marker_a_precedes_b({a, "x", a}));
    EXPECT_FALSE(marker_a_precedes_b({"x"}));
}

TEST(SyntheticTask, ExactlyBalancedAndDeterministic)
{
    const auto ds = make_synthetic_order_task(2000, 50, 3);
    const auto labels = ds.labels();
    EXPECT_EQ(std::count(labels.begin(), labels.end(), 1u), 1000);
    EXPECT_EQ(std::count(labels.begin(), labels.end(), 0u), 1000);
    EXPECT_TRUE(ds.has_trees());
    for (const auto& ex : ds.examples) {
        const auto tokens = tokenize(ex.text);
        EXPECT_GE(tokens.size(), 4u);
        EXPECT_LE(tokens.size(), 12u);
        EXPECT_EQ(ex.label, marker_a_precedes_b(tokens) ? 1u : 0u);
        EXPECT_EQ(ex.tree->leaves, tokens);
        EXPECT_TRUE(is_well_formed(*ex.tree));
    }
    const auto& s = std::get<ExplicitSplits>(ds.splits);
    EXPECT_EQ(s.train.size(), 1200u);
    EXPECT_EQ(s.dev.size(), 400u);
    EXPECT_EQ(s.test.size(), 400u);
    for (const auto* split : {&s.train, &s.dev, &s.test}) {
        std::size_t ones = 0;
        for (std::size_t i : *split) ones += ds.examples[i].label;
        EXPECT_EQ(2 * ones, split->size());
    }
    EXPECT_TRUE(same_dataset(ds, make_synthetic_order_task(2000, 50, 3)));
    EXPECT_FALSE(same_dataset(ds, make_synthetic_order_task(2000, 50, 4)));
    EXPECT_THROW(make_synthetic_order_task(7, 50, 1), config_error);
}

TEST(SyntheticTask, VocabularyIsCovered)
{
    const auto table = make_synthetic_embeddings(50, 16, 1);
    EXPECT_EQ(table.size(), 52u);
    for (const auto& ex : make_synthetic_order_task(200, 50, 1).examples)
        for (const auto& t : tokenize(ex.text)) EXPECT_TRUE(table.contains(t)) << t;
    EXPECT_EQ(clean_token(synthetic_filler(777)), synthetic_filler(777));
}
