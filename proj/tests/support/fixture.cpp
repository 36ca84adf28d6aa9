#include "fixture.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "sift/csv.hpp"
#include "sift/random.hpp"

namespace fixture {

namespace {

using Vocabulary = std::array<const char*, 40>;

constexpr std::array<Vocabulary, 3> k_blobs = {{
    {"cardiac", "artery", "stent", "valve", "arrhythmia", "ventricle", "myocardial", "infarction", "coronary",
     "angioplasty", "hypertension", "statin", "cholesterol", "aorta", "atrial", "fibrillation", "echocardiogram",
     "troponin", "ischemia", "bypass", "catheter", "pacemaker", "diastolic", "systolic", "embolism", "thrombosis",
     "anticoagulant", "vascular", "plaque", "lipid", "heart", "pulse", "cardiomyopathy", "stenosis", "aneurysm",
     "endocarditis", "pericardium", "electrocardiogram", "perfusion", "capillary"},
    {"coral", "reef", "plankton", "salinity", "estuary", "kelp", "seagrass", "mangrove", "tide", "dolphin", "whale",
     "fishery", "trawler", "sediment", "algae", "bleaching", "acidification", "lagoon", "oyster", "mussel", "krill",
     "upwelling", "benthic", "pelagic", "salmon", "tuna", "shoreline", "zooplankton", "phytoplankton", "seabird",
     "turtle", "sponge", "urchin", "anemone", "jellyfish", "ocean", "nutrient", "hypoxia", "dredging", "habitat"},
    {"actuator", "gripper", "servo", "lidar", "odometry", "manipulator", "kinematics", "trajectory", "controller",
     "torque", "encoder", "chassis", "drone", "quadrotor", "gimbal", "firmware", "microcontroller", "sensor",
     "localization", "mapping", "slam", "pathfinding", "locomotion", "exoskeleton", "joint", "payload",
     "teleoperation", "autonomy", "navigation", "obstacle", "swarm", "calibration", "camera", "gearbox", "motor",
     "battery", "feedback", "simulation", "wheel", "arm"},
}};

std::string capitalised(std::string s)
{
    if (!s.empty()) {
        s[0] = static_cast<char>(s[0] - 'a' + 'A');
    }
    return s;
}

std::vector<std::string> draw(sift::Rng& rng, int blob, std::size_t count)
{
    const auto& vocab = k_blobs[static_cast<std::size_t>(blob)];
    std::vector<std::string> words;
    while (words.size() < count) {
        std::string w = vocab[rng.below(vocab.size())];
        if (std::find(words.begin(), words.end(), w) == words.end()) {
            words.push_back(std::move(w));
        }
    }
    return words;
}

std::string sentence(const std::vector<std::string>& words)
{
    std::string s = capitalised(words.front());
    for (std::size_t i = 1; i < words.size(); ++i) {
        s += " " + words[i];
    }
    return s + ".";
}

sift::SourceRecord blob_article(sift::Rng& rng, int blob)
{
    sift::SourceRecord r;
    r.title = sentence(draw(rng, blob, 4));
    r.title.pop_back();
    std::vector<std::string> parts;
    for (int i = 0; i < 3; ++i) {
        parts.push_back(sentence(draw(rng, blob, 6 + rng.below(3))));
    }
    r.abstract = parts[0] + " " + parts[1] + " " + parts[2];
    return r;
}

sift::SourceRecord marker_article(sift::Rng& rng, int blob, bool planted)
{
    const std::string group = planted ? "children" : "adults";
    const auto topic = draw(rng, blob, 8);
    sift::SourceRecord r;
    r.title = "Mindfulness meditation for anxiety in " + group + " with " + topic[0] + " " + topic[1];
    r.abstract = "Mindfulness meditation lowered anxiety among " + group + ". "
        + sentence({topic[2], topic[3], topic[4]}) + " " + sentence({topic[5], topic[6], topic[7]});
    return r;
}

ReviewCorpus assemble(sift::Rng& rng, std::vector<sift::SourceRecord> pending, std::vector<int> blobs,
                      std::vector<int> kinds)
{
    // Shuffle so ids carry no blob or marker pattern.
    std::vector<std::size_t> order(pending.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[rng.below(i)]);
    }
    ReviewCorpus c;
    c.question = k_question;
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        auto r = pending[order[pos]];
        char id[32];
        std::snprintf(id, sizeof id, "a%03zu", pos + 1);
        r.id = id;
        r.metadata["year"] = std::to_string(2000 + rng.below(25));
        c.blob.push_back(blobs[order[pos]]);
        if (kinds[order[pos]] >= 1) {
            c.markers.insert(r.id);
        }
        if (kinds[order[pos]] == 2) {
            c.planted.insert(r.id);
        }
        c.records.push_back(std::move(r));
    }
    return c;
}

// `words` blob terms, four of them forming the title and the rest the
// abstract in sentences of about seven, with `q` question terms dropped
// into the abstract.
sift::SourceRecord seeded_article(sift::Rng& rng, int blob, std::size_t words, std::size_t q)
{
    static constexpr std::array<const char*, 4> terms = {"mindfulness", "meditation", "anxiety", "adults"};
    auto body = draw(rng, blob, words);
    sift::SourceRecord r;
    r.title = sentence({body.end() - 4, body.end()});
    r.title.pop_back();
    body.resize(words - 4);
    std::vector<std::size_t> picks;
    while (picks.size() < q) {
        const std::size_t t = rng.below(terms.size());
        if (std::find(picks.begin(), picks.end(), t) == picks.end()) {
            picks.push_back(t);
        }
    }
    for (const auto t : picks) {
        body.insert(body.begin() + static_cast<std::ptrdiff_t>(rng.below(body.size() + 1)), terms[t]);
    }
    for (std::size_t i = 0; i < body.size(); i += 7) {
        const auto end = std::min(body.size(), i + 7);
        r.abstract += (r.abstract.empty() ? "" : " ")
            + sentence({body.begin() + static_cast<std::ptrdiff_t>(i), body.begin() + static_cast<std::ptrdiff_t>(end)});
    }
    return r;
}

}  // namespace

ReviewCorpus split_review_corpus(std::uint64_t seed, const SplitParams& p)
{
    sift::Rng rng(seed);
    std::vector<sift::SourceRecord> pending;
    std::vector<int> blobs;
    std::vector<int> kinds;
    for (std::size_t i = 0; i < p.n; ++i) {
        const int blob = static_cast<int>(i % 3);
        if (i < p.markers) {
            const auto words = p.marker_words_min + rng.below(p.marker_words_max - p.marker_words_min + 1);
            pending.push_back(seeded_article(rng, blob, words, p.marker_q));
            kinds.push_back(1);
        } else {
            // Blob terms chosen so q / (q + words) stays under the screen.
            const double u = rng.uniform();
            std::size_t q = 0;
            std::size_t words = 10 + rng.below(10);
            if (u < p.decoy3) {
                q = 3;
                words = 23 + rng.below(6);
            } else if (u < p.decoy3 + p.decoy2) {
                q = 2;
                words = 15 + rng.below(6);
            } else if (u < p.decoy3 + p.decoy2 + p.decoy1) {
                q = 1;
                words = 8 + rng.below(6);
            }
            pending.push_back(seeded_article(rng, blob, words, q));
            kinds.push_back(0);
        }
        blobs.push_back(blob);
    }
    return assemble(rng, std::move(pending), std::move(blobs), std::move(kinds));
}

ReviewCorpus review_corpus(std::uint64_t seed, std::size_t n, std::size_t markers, std::size_t planted)
{
    sift::Rng rng(seed);
    std::vector<sift::SourceRecord> pending;
    std::vector<int> blobs;
    std::vector<int> kinds;
    for (std::size_t i = 0; i < n; ++i) {
        const int blob = static_cast<int>(i % 3);
        // Markers take the first slots round-robin, so they split evenly.
        const bool marker = i < markers;
        const bool plant = marker && i >= markers - std::min(planted, markers);
        pending.push_back(marker ? marker_article(rng, blob, plant) : blob_article(rng, blob));
        blobs.push_back(blob);
        kinds.push_back(plant ? 2 : marker ? 1 : 0);
    }
    return assemble(rng, std::move(pending), std::move(blobs), std::move(kinds));
}

ReviewCorpus irrelevant_corpus(std::uint64_t seed, std::size_t n)
{
    return review_corpus(seed, n, 0, 0);
}

std::string to_csv(const std::vector<sift::SourceRecord>& records)
{
    std::string out = "id,title,abstract,year\n";
    for (const auto& r : records) {
        const auto it = r.metadata.find("year");
        out += sift::csv::format_row({r.id, r.title, r.abstract, it == r.metadata.end() ? "" : it->second});
    }
    return out;
}

std::string to_jsonl(const std::vector<sift::SourceRecord>& records)
{
    std::string out;
    for (const auto& r : records) {
        nlohmann::json j = {{"id", r.id}, {"title", r.title}, {"abstract", r.abstract}};
        for (const auto& [k, v] : r.metadata) {
            j[k] = v;
        }
        out += j.dump() + "\n";
    }
    return out;
}

std::vector<sift::Point> planar_blobs(std::uint64_t seed, std::size_t per_blob, double separation)
{
    sift::Rng rng(seed);
    const double pi = std::acos(-1.0);
    std::vector<sift::Point> out;
    for (int b = 0; b < 3; ++b) {
        const double angle = 2.0 * pi * b / 3.0;
        const sift::Point centre{separation * std::cos(angle), separation * std::sin(angle)};
        for (std::size_t i = 0; i < per_blob; ++i) {
            out.push_back({centre.x + rng.uniform() * 2.0 - 1.0, centre.y + rng.uniform() * 2.0 - 1.0});
        }
    }
    return out;
}

std::vector<sift::Point> random_points(std::uint64_t seed, std::size_t n, double scale)
{
    sift::Rng rng(seed);
    std::vector<sift::Point> out;
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back({rng.uniform() * scale, rng.uniform() * scale});
    }
    return out;
}

}  // namespace fixture
