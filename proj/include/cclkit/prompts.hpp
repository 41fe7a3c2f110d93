#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include "cclkit/errors.hpp"

namespace cclkit {

/// Named prompt templates with {placeholder} substitution. The built-in
/// set can be overridden per id by dropping <id>.txt files into a
/// directory. Placeholders without a binding are left verbatim, so JSON
/// braces inside instructions survive rendering.
struct PromptSet {
    std::map<std::string, std::string> templates;

    static PromptSet defaults() {
        PromptSet p;
        p.templates["caption"] =
            "You are a medical imaging expert. The image is referenced as {image}.\n"
            "Describe the image: name the modality, the organ or region shown, and any findings\n"
            "that could matter for this question: {question}\n"
            "Reply with the caption text only.";
        p.templates["reasoning"] =
            "Image caption:\n{caption}\n\n"
            "Question: {question}\n"
            "Gold answer: {answer}\n\n"
            "Lay out, step by step, the reasoning that leads from the findings in the caption\n"
            "to the gold answer. Reply with the reasoning text only.";
        p.templates["meta"] =
            "You rewrite medical visual questions while preserving exactly the knowledge needed\n"
            "to answer them.\n\n"
            "Original question: {question}\n"
            "Gold answer: {answer}\n"
            "Image caption: {caption}\n"
            "Reasoning: {reasoning}\n\n"
            "Produce three rephrasings of the original question:\n"
            "  - word: change a word or two (synonyms, articles), keep the structure;\n"
            "  - sentence: restructure the sentence, keep the meaning;\n"
            "  - semantic: ask for the same fact from a different angle.\n"
            "Each rephrasing must be answerable with the gold answer and must not require any\n"
            "knowledge beyond the original question.\n"
            "Respond with a single JSON object shaped exactly like:\n"
            "{\"word\": {\"question\": \"...\", \"answer\": \"...\"},\n"
            " \"sentence\": {\"question\": \"...\", \"answer\": \"...\"},\n"
            " \"semantic\": {\"question\": \"...\", \"answer\": \"...\"}}";
        p.templates["validation"] =
            "Original question: {question}\n"
            "Gold answer: {answer}\n"
            "Candidate rephrasing ({level} level): {variant}\n\n"
            "Accept the candidate only if it asks for the same medical knowledge as the original\n"
            "question, is answerable with the gold answer, and needs no extra knowledge.\n"
            "Respond with a single JSON object shaped exactly like:\n"
            "{\"verdict\": \"accept\", \"reason\": \"...\"} or {\"verdict\": \"reject\", \"reason\": \"...\"}";
        return p;
    }

    static PromptSet load(const std::string& override_dir) {
        PromptSet p = defaults();
        if (override_dir.empty()) return p;
        namespace fs = std::filesystem;
        if (!fs::is_directory(override_dir))
            throw IoError("prompt template directory not found: " + override_dir);
        for (const auto& entry : fs::directory_iterator(override_dir)) {
            if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
            std::ifstream in(entry.path(), std::ios::binary);
            if (!in) throw IoError("cannot read template: " + entry.path().string());
            p.templates[entry.path().stem().string()] =
                std::string(std::istreambuf_iterator<char>(in), {});
        }
        return p;
    }

    std::string render(const std::string& id, const std::map<std::string, std::string>& vars) const {
        auto it = templates.find(id);
        if (it == templates.end()) throw ValidationError("unknown prompt template: \"" + id + "\"");
        const std::string& tpl = it->second;
        std::string out;
        out.reserve(tpl.size());
        std::size_t i = 0;
        while (i < tpl.size()) {
            if (tpl[i] == '{') {
                auto close = tpl.find('}', i + 1);
                if (close != std::string::npos) {
                    auto key = tpl.substr(i + 1, close - i - 1);
                    auto var = vars.find(key);
                    if (var != vars.end()) {
                        out += var->second;
                        i = close + 1;
                        continue;
                    }
                }
            }
            out.push_back(tpl[i++]);
        }
        return out;
    }
};

} // namespace cclkit
