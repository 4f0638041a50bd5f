#include "support.hpp"

#include <sstream>

using namespace randenc;
using namespace testing_support;

TEST(LoadEmbeddings, SmallFile)
{
    std::istringstream in{"a 1.0 2.0\nb 3.0 4.0"};
    const auto loaded = read_embeddings(in);
    EXPECT_EQ(loaded.table.dim(), 2u);
    EXPECT_EQ(loaded.table.size(), 2u);
    EXPECT_EQ(*loaded.table.find("b"), (Vector{3.0, 4.0}));
    EXPECT_EQ(loaded.table.find("c"), nullptr);
}

TEST(LoadEmbeddings, DimensionMismatchNamesTheLine)
{
    std::istringstream in{"a 1.0 2.0\nb 3.0 4.0 5.0\n"};
    try {
        read_embeddings(in);
        FAIL() << "expected a parse error";
    } catch (const parse_error& e) {
        EXPECT_NE(std::string{e.what()}.find("line 2"), std::string::npos) << e.what();
    }
    std::istringstream expected{"a 1.0 2.0\n"};
    EXPECT_THROW(read_embeddings(expected, 3), parse_error);
}

TEST(LoadEmbeddings, EmptyFileIsAnError)
{
    std::istringstream empty{""};
    EXPECT_THROW(read_embeddings(empty), error);
    std::istringstream blank{"\n\n"};
    EXPECT_THROW(read_embeddings(blank), error);
    EXPECT_THROW(load_embeddings("/nonexistent/vectors.txt"), error);
}

TEST(LoadEmbeddings, BadNumberIsAnError)
{
    std::istringstream in{"a 1.0 x2\n"};
    EXPECT_THROW(read_embeddings(in), parse_error);
}

TEST(LoadEmbeddings, DuplicatesKeepFirstOccurrence)
{
    std::istringstream in{"a 1 2\nb 3 4\na 5 6\n"};
    const auto loaded = read_embeddings(in);
    EXPECT_EQ(loaded.duplicates, 1u);
    EXPECT_EQ(*loaded.table.find("a"), (Vector{1.0, 2.0}));
}

TEST(LoadEmbeddings, LookupIsCaseSensitive)
{
    std::istringstream in{"Paris 1 2\nparis 3 4\n"};
    const auto loaded = read_embeddings(in);
    EXPECT_EQ(*loaded.table.find("Paris"), (Vector{1.0, 2.0}));
    EXPECT_EQ(*loaded.table.find("paris"), (Vector{3.0, 4.0}));
}

TEST(LoadEmbeddings, TenThousandLineRoundTrip)
{
    TempDir dir;
    const auto path = dir.path() / "vectors.txt";
    SeededRng rng{1};
    std::vector<Vector> written;
    {
        std::ofstream out{path};
        for (int i = 0; i < 10000; ++i) {
            Vector v(5);
            for (double& x : v) x = rng.normal() * std::pow(10.0, static_cast<double>(rng.below(9)) - 4.0);
            write_embedding_line(out, "word_" + std::to_string(i), v);
            written.push_back(std::move(v));
        }
    }
    const auto loaded = load_embeddings(path, 5);
    EXPECT_EQ(loaded.table.size(), 10000u);
    EXPECT_EQ(*loaded.table.find("word_7777"), written[7777]);
    for (int i = 0; i < 10000; i += 37) EXPECT_EQ(*loaded.table.find("word_" + std::to_string(i)), written[static_cast<std::size_t>(i)]);
}

TEST(Tokenize, SplitsOnWhitespaceAndLowercases)
{
    EXPECT_EQ(tokenize("  The cat\tSAT\n"), (std::vector<std::string>{"the", "cat", "sat"}));
    EXPECT_EQ(tokenize("The Cat", false), (std::vector<std::string>{"The", "Cat"}));
    EXPECT_TRUE(tokenize("   ").empty());
}

TEST(CleanTokens, Examples)
{
    EXPECT_EQ(clean_tokens({"hello,", "world!"}), (std::vector<std::string>{"hello", "world"}));
    EXPECT_EQ(clean_tokens({"42"}), (std::vector<std::string>{"42"}));
    EXPECT_EQ(clean_tokens({"3mg", "!!!"}), (std::vector<std::string>{"mg", "*"}));
}

TEST(CleanTokens, UnicodeCategories)
{
    EXPECT_EQ(clean_token("«café»"), "café");
    EXPECT_EQ(clean_token("€100"), "100");
    EXPECT_EQ(clean_token("don't"), "dont");
    EXPECT_EQ(clean_token("٣"), "٣");
    EXPECT_EQ(clean_token("\xe2\x80\x94"), "*");  // U+2014, punctuation
}

TEST(CleanTokens, Idempotent)
{
    const std::vector<std::string> raw{"a1b2", "...", "x-ray", "2024", "(ok)", "é!", "7up", "", "*", "%%9"};
    const auto once = clean_tokens(raw);
    EXPECT_EQ(once.size(), raw.size());
    EXPECT_EQ(clean_tokens(once), once);
}

TEST(EmbedSentence, InVocabularyRowsAreExact)
{
    WordEmbeddingTable table{2};
    table.insert("a", {1.0, 2.0});
    table.insert("b", {3.0, 4.0});
    const auto seq = embed_sentence(table, {"b", "a", "b"});
    EXPECT_EQ(seq.tokens, (std::vector<std::string>{"b", "a", "b"}));
    EXPECT_EQ(seq.vectors, (std::vector<Vector>{{3.0, 4.0}, {1.0, 2.0}, {3.0, 4.0}}));
}

TEST(EmbedSentence, OutOfVocabularyPolicy)
{
    WordEmbeddingTable table{2};
    table.insert("a", {1.0, 2.0});
    const auto none = embed_sentence(table, {"x", "y"});
    ASSERT_EQ(none.length(), 1u);
    EXPECT_EQ(none.vectors[0], (Vector{0.0, 0.0}));
    EXPECT_EQ(none.tokens[0], "*");

    const auto mixed = embed_sentence(table, {"x", "a", "y", "a"});
    EXPECT_EQ(mixed.length(), 2u);
    EXPECT_EQ(mixed.tokens, (std::vector<std::string>{"a", "a"}));

    EXPECT_THROW(embed_sentence(table, {}), error);
}

TEST(EmbedSentence, AlignedLookupKeepsPositions)
{
    WordEmbeddingTable table{2};
    table.insert("a", {1.0, 2.0});
    const auto seq = embed_aligned(table, {"x", "a"});
    ASSERT_EQ(seq.length(), 2u);
    EXPECT_EQ(seq.vectors[0], (Vector{0.0, 0.0}));
    EXPECT_EQ(seq.vectors[1], (Vector{1.0, 2.0}));
}

TEST(EmbedSentence, NeverEmpty)
{
    WordEmbeddingTable table{3};
    table.insert("k", {1.0, 1.0, 1.0});
    SeededRng rng{2};
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::string> tokens;
        for (std::uint64_t i = 0, n = 1 + rng.below(6); i < n; ++i) tokens.push_back(rng.below(4) ? "oov" : "k");
        EXPECT_GE(embed_sentence(table, tokens).length(), 1u);
    }
}
