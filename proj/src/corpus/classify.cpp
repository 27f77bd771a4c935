// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cctype>

#include <spdlog/spdlog.h>

#include "mmkit/common/error.hpp"
#include "mmkit/common/text.hpp"
#include "mmkit/corpus/pipeline.hpp"

namespace mmkit::corpus {

const std::vector<std::string>& title_categories() {
    static const std::vector<std::string> kCategories = {
        "Neuroscience/Neurology",
        "Obstetrics and Gynecology",
        "Infectious Diseases",
        "Radiology",
        "Dermatology",
        "Family medicine",
        "Oncology",
        "Immunology",
        "Biomedical engineering",
        "Surgery",
        "Dentistry / Orthodontics",
        "Anesthesiology",
        "Cardiology",
        "Ophthalmology",
        "Physiology",
        "Psychiatry",
        "Pediatrics",
        "Medical history",
        "Pharmacology",
        "Pathology",
        "Nursing",
        "Herbal medicine",
        "Anatomy",
        "Otolaryngology",
        "Orthopedics",
        "Gastroenterology",
        "Hematology",
        "Nutrition",
        "Endocrinology",
        "Urology",
        "Internal Medicine",
        "Genetics",
        "Pulmonology",
        "Sports Medicine",
        "Medical Research and Statistics",
        "Emergency Medicine",
        "Cell Biology and Histology",
        "Pain medicine",
        "Public Health and Epidemiology",
        "Forensics",
        "Biochemistry",
        "Nephrology",
        "Critical care medicine",
        "Medical Ethics",
        "Veterinary medicine",
        "Physical Medicine and Rehabilitation",
        "Health informatics",
        "Mindfulness",
        "Other",
    };
    return kCategories;
}

bool is_title_category(std::string_view category) {
    const auto& all = title_categories();
    return std::find(all.begin(), all.end(), category) != all.end();
}

KeywordClassifier::KeywordClassifier()
    : rules_{
          {"neurosci", "Neuroscience/Neurology"},
          {"neurolog", "Neuroscience/Neurology"},
          {"brain", "Neuroscience/Neurology"},
          {"obstetric", "Obstetrics and Gynecology"},
          {"gynecolog", "Obstetrics and Gynecology"},
          {"gynaecolog", "Obstetrics and Gynecology"},
          {"infectious", "Infectious Diseases"},
          {"microbiolog", "Infectious Diseases"},
          {"radiolog", "Radiology"},
          {"imaging", "Radiology"},
          {"dermatolog", "Dermatology"},
          {"family medicine", "Family medicine"},
          {"primary care", "Family medicine"},
          {"oncolog", "Oncology"},
          {"cancer", "Oncology"},
          {"immunolog", "Immunology"},
          {"biomedical engineering", "Biomedical engineering"},
          {"bioengineering", "Biomedical engineering"},
          {"dentist", "Dentistry / Orthodontics"},
          {"dental", "Dentistry / Orthodontics"},
          {"orthodont", "Dentistry / Orthodontics"},
          {"anesthes", "Anesthesiology"},
          {"anaesthes", "Anesthesiology"},
          {"cardio", "Cardiology"},
          {"heart", "Cardiology"},
          {"ophthalm", "Ophthalmology"},
          {"psychiatr", "Psychiatry"},
          {"pediatr", "Pediatrics"},
          {"paediatr", "Pediatrics"},
          {"history of medicine", "Medical history"},
          {"medical history", "Medical history"},
          {"pharmacolog", "Pharmacology"},
          {"patholog", "Pathology"},
          {"nursing", "Nursing"},
          {"herbal", "Herbal medicine"},
          {"anatom", "Anatomy"},
          {"otolaryngolog", "Otolaryngology"},
          {"orthop", "Orthopedics"},
          {"gastro", "Gastroenterology"},
          {"hematolog", "Hematology"},
          {"haematolog", "Hematology"},
          {"nutrition", "Nutrition"},
          {"endocrin", "Endocrinology"},
          {"urolog", "Urology"},
          {"internal medicine", "Internal Medicine"},
          {"genetic", "Genetics"},
          {"genomic", "Genetics"},
          {"pulmon", "Pulmonology"},
          {"respirat", "Pulmonology"},
          {"sports", "Sports Medicine"},
          {"statistic", "Medical Research and Statistics"},
          {"emergency", "Emergency Medicine"},
          {"histolog", "Cell Biology and Histology"},
          {"cell biology", "Cell Biology and Histology"},
          {"pain", "Pain medicine"},
          {"epidemiolog", "Public Health and Epidemiology"},
          {"public health", "Public Health and Epidemiology"},
          {"forensic", "Forensics"},
          {"biochem", "Biochemistry"},
          {"nephrolog", "Nephrology"},
          {"kidney", "Nephrology"},
          {"critical care", "Critical care medicine"},
          {"intensive care", "Critical care medicine"},
          {"ethic", "Medical Ethics"},
          {"veterinar", "Veterinary medicine"},
          {"rehabilitation", "Physical Medicine and Rehabilitation"},
          {"informatics", "Health informatics"},
          {"mindful", "Mindfulness"},
          {"meditation", "Mindfulness"},
          {"physiolog", "Physiology"},
          {"surg", "Surgery"},
      } {}

std::string KeywordClassifier::classify(const std::string& title, const std::vector<std::string>& /*categories*/) {
    std::string lowered = title;
    for (auto& c : lowered) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    for (const auto& [keyword, category] : rules_) {
        if (lowered.find(keyword) != std::string::npos) return category;
    }
    return std::string(kOtherCategory);
}

RemoteClassifier::RemoteClassifier(std::unique_ptr<JsonTransport> transport, std::string path)
    : transport_(std::move(transport)), path_(std::move(path)) {}

RemoteClassifier::~RemoteClassifier() = default;

std::string RemoteClassifier::classify(const std::string& title, const std::vector<std::string>& categories) {
    const Json reply = call_with_retry(*transport_, path_, {{"title", title}, {"categories", categories}}, RetryPolicy{});
    if (!reply.is_object() || !reply.contains("category") || !reply.at("category").is_string())
        throw Error(ErrorKind::Transport, "classifier reply lacks a string 'category'");
    return reply.at("category").get<std::string>();
}

std::vector<TitleCategory> classify_titles(const std::vector<std::string>& titles, TextClassifierClient& classifier,
                                           std::size_t* coerced) {
    std::vector<TitleCategory> out;
    out.reserve(titles.size());
    std::size_t coerced_count = 0;
    for (const auto& title : titles) {
        if (text::trim(title).empty()) {
            out.push_back({title, std::string(kOtherCategory)});
            continue;
        }
        std::string category = classifier.classify(title, title_categories());
        if (!is_title_category(category)) {
            spdlog::warn("classifier returned '{}' for '{}', outside the vocabulary; using Other", category, title);
            category = std::string(kOtherCategory);
            ++coerced_count;
        }
        out.push_back({title, std::move(category)});
    }
    if (coerced) *coerced = coerced_count;
    return out;
}

} // namespace mmkit::corpus
