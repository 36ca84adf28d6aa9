#include <doctest.h>

#include <cmath>

#include "fixture.hpp"
#include "oracles.hpp"
#include "sift/corpus.hpp"
#include "sift/error.hpp"
#include "sift/mock_provider.hpp"
#include "sift/vecmath.hpp"

using namespace sift;

namespace {

ErrorCode code_of(const std::function<void()>& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no sift::Error thrown");
    return ErrorCode::Io;
}

SourceRecord rec(std::string id, std::string title, std::string abstract = "text")
{
    SourceRecord r;
    r.id = std::move(id);
    r.title = std::move(title);
    r.abstract = std::move(abstract);
    return r;
}

}  // namespace

TEST_SUITE("corpus")
{
    TEST_CASE("ingest keeps source order and flags missing abstracts")
    {
        const auto c = ingest({rec("b", "B"), rec("a", "A", ""), rec("c", "C")}, "q");
        REQUIRE(c.size() == 3);
        CHECK(c.at(0).id == "b");
        CHECK(c.at(1).abstract_missing);
        CHECK_FALSE(c.at(0).abstract_missing);
        CHECK(c.index_of("c") == 2u);
        CHECK_FALSE(c.index_of("zz"));
        CHECK(c.at(0).read_state == ReadState::Unread);
        CHECK(c.at(0).decision == Decision::Undecided);
        CHECK_FALSE(c.at(0).relevance);
    }

    TEST_CASE("ingest errors")
    {
        CHECK(code_of([] { (void)ingest({}, "q"); }) == ErrorCode::EmptyCorpus);
        try {
            (void)ingest({rec("A1", "x"), rec("A1", "y")}, "q");
            FAIL("expected DuplicateId");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::DuplicateId);
            CHECK(e.detail() == "A1");
        }
        try {
            (void)ingest({rec("A1", "x"), rec("A2", " ")}, "q");
            FAIL("expected MissingField");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::MissingField);
            CHECK(e.detail() == "row 2: title");
        }
        CHECK(code_of([] { (void)Corpus().find("x"); }) == ErrorCode::UnknownArticle);
    }

    TEST_CASE("491 records ingest to 491 articles")
    {
        const auto f = fixture::review_corpus(1, 491, 9, 0);
        const auto c = ingest(read_csv_records(fixture::to_csv(f.records)), f.question);
        CHECK(c.size() == 491);
    }

    TEST_CASE("ingest twice yields identical corpora")
    {
        const auto f = fixture::review_corpus(2, 50);
        const auto a = ingest(f.records, f.question);
        const auto b = ingest(f.records, f.question);
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a.at(i).id == b.at(i).id);
            CHECK(a.at(i).title == b.at(i).title);
            CHECK(a.at(i).abstract == b.at(i).abstract);
            CHECK(a.at(i).metadata == b.at(i).metadata);
        }
    }

    TEST_CASE("CSV and JSONL readers agree")
    {
        const auto f = fixture::review_corpus(3, 30);
        const auto from_csv = read_records(fixture::to_csv(f.records));
        const auto from_jsonl = read_records(fixture::to_jsonl(f.records));
        REQUIRE(from_csv.size() == 30);
        REQUIRE(from_jsonl.size() == 30);
        for (std::size_t i = 0; i < 30; ++i) {
            CHECK(from_csv[i].id == from_jsonl[i].id);
            CHECK(from_csv[i].title == f.records[i].title);
            CHECK(from_jsonl[i].abstract == f.records[i].abstract);
            CHECK(from_csv[i].metadata.at("year") == f.records[i].metadata.at("year"));
            CHECK(from_jsonl[i].metadata.at("year") == f.records[i].metadata.at("year"));
        }
    }

    TEST_CASE("reader errors")
    {
        CHECK(code_of([] { (void)read_csv_records("id,title\n1,x\n"); }) == ErrorCode::MissingField);
        CHECK(code_of([] { (void)read_jsonl_records("{\"id\":\"1\",\"title\":\"t\"}\n"); }) == ErrorCode::MissingField);
        CHECK(code_of([] { (void)read_jsonl_records("{\"id\":1,\n"); }) == ErrorCode::MalformedUpload);
        // Blank rows are skipped.
        CHECK(read_csv_records("id,title,abstract\n1,t,a\n,,\n").size() == 1);
    }

    TEST_CASE("embedding is unit norm, deterministic and idempotent")
    {
        const auto f = fixture::review_corpus(4, 40);
        MockProvider p;
        auto c = ingest(f.records, f.question);
        embed_corpus(c, p, 7);
        for (const auto& a : c.articles()) {
            CHECK(std::abs(vec::norm(a.embedding) - 1.0) <= 1e-6);
            REQUIRE(a.relevance);
            CHECK(*a.relevance >= -1.0);
            CHECK(*a.relevance <= 1.0);
        }
        auto again = c;
        embed_corpus(again, p, 64);
        for (std::size_t i = 0; i < c.size(); ++i) {
            CHECK(c.at(i).embedding == again.at(i).embedding);
            CHECK(c.at(i).relevance == again.at(i).relevance);
        }
        CHECK(c.question_embedding() == again.question_embedding());
    }

    TEST_CASE("relevance equals the inner product recomputed independently")
    {
        const auto f = fixture::review_corpus(5, 60);
        MockProvider p;
        auto c = ingest(f.records, f.question);
        embed_corpus(c, p);
        const auto& q = c.question_embedding();
        for (const auto& a : c.articles()) {
            double dot = 0;
            for (std::size_t i = 0; i < q.size(); ++i) {
                dot += q[i] * a.embedding[i];
            }
            CHECK(std::abs(*a.relevance - dot) <= 1e-9);
        }
    }

    TEST_CASE("score_relevance on toy vectors")
    {
        std::vector<ArticleRecord> arts(3);
        arts[0].id = "same";
        arts[0].embedding = {1, 0, 0, 0};
        arts[1].id = "orth";
        arts[1].embedding = {0, 0, 1, 0};
        arts[2].id = "tilt";
        arts[2].embedding = {0.6, 0.8, 0, 0};
        Corpus c(arts, "q");
        CHECK(code_of([&] { score_relevance(c); }) == ErrorCode::EmbeddingsMissing);
        c.set_question_embedding({1, 0, 0, 0});
        score_relevance(c);
        CHECK(*c.at(0).relevance == doctest::Approx(1.0));
        CHECK(*c.at(1).relevance == doctest::Approx(0.0));
        CHECK(*c.at(2).relevance == doctest::Approx(0.6));
    }

    TEST_CASE("empty corpus cannot be embedded")
    {
        Corpus c;
        MockProvider p;
        CHECK(code_of([&] { embed_corpus(c, p); }) == ErrorCode::EmptyCorpus);
    }
}
