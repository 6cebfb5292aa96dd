#pragma once

#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "angleboost/boost.hpp"
#include "angleboost/csv.hpp"
#include "angleboost/data.hpp"
#include "angleboost/format.hpp"
#include "angleboost/loss.hpp"

namespace angleboost {

/// Everything a trained model needs to score fresh CSV rows: the fitted
/// ensemble plus the training-time pipeline (label mapping, column encoders,
/// standardization statistics) and the cost matrix for expected-cost output.
struct Model {
    Ensemble ensemble{2, LossKind::exponential};
    CostMatrix cost{2, Matrix(2, 2)};
    LabelMap labels;
    FeatureEncoder encoder;
    StandardizeStats standardizer;
    bool standardized = false;
};

namespace detail {

inline std::string rest_of_line(std::istringstream& stream) {
    std::string rest;
    std::getline(stream, rest);
    if (!rest.empty() && rest.front() == ' ') rest.erase(0, 1);
    return rest;
}

inline std::string expect_line(std::istream& in, const std::string& what) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("model file: missing " + what);
    return line;
}

}  // namespace detail

inline void write_model(std::ostream& out, const Model& model) {
    out << "angleboost-model 1\n";
    out << "label_column " << model.labels.column << '\n';
    out << "classes " << model.labels.k() << '\n';
    for (int cls = 1; cls <= model.labels.k(); ++cls)
        out << "class " << cls << ' ' << model.labels.classes[static_cast<std::size_t>(cls - 1)]
            << '\n';
    out << "cost\n";
    for (int j = 1; j <= model.cost.k(); ++j) {
        for (int t = 1; t <= model.cost.k(); ++t)
            out << (t > 1 ? " " : "") << detail::format_double(model.cost.cost(j, t));
        out << '\n';
    }
    out << "columns " << model.encoder.sources.size() << '\n';
    for (const FeatureEncoder::Source& src : model.encoder.sources) {
        if (src.kind == ColumnKind::numeric) {
            out << "numeric " << detail::format_double(src.impute_value) << ' ' << src.name << '\n';
        } else {
            std::size_t impute_index = 0;
            for (std::size_t c = 0; c < src.categories.size(); ++c)
                if (src.categories[c] == src.impute_category) impute_index = c;
            out << "categorical " << src.categories.size() << ' ' << impute_index << ' ' << src.name
                << '\n';
            for (const std::string& cat : src.categories) out << "category " << cat << '\n';
        }
    }
    out << "standardize " << (model.standardized ? 1 : 0) << '\n';
    if (model.standardized) {
        for (std::size_t j = 0; j < model.standardizer.mean.size(); ++j)
            out << "stats " << detail::format_double(model.standardizer.mean[j]) << ' '
                << detail::format_double(model.standardizer.sd[j]) << ' '
                << (model.standardizer.scaled[j] ? 1 : 0) << '\n';
    }
    write_ensemble(out, model.ensemble);
}

inline Model read_model(std::istream& in) {
    Model model;
    if (detail::expect_line(in, "magic") != "angleboost-model 1")
        throw std::runtime_error("model file: unrecognized format");

    {
        std::istringstream line(detail::expect_line(in, "label column"));
        std::string tag;
        line >> tag;
        if (tag != "label_column") throw std::runtime_error("model file: expected label_column");
        model.labels.column = detail::rest_of_line(line);
    }
    int k = 0;
    {
        std::istringstream line(detail::expect_line(in, "class count"));
        std::string tag;
        line >> tag >> k;
        if (tag != "classes" || k < 2) throw std::runtime_error("model file: bad class count");
    }
    for (int cls = 1; cls <= k; ++cls) {
        std::istringstream line(detail::expect_line(in, "class label"));
        std::string tag;
        int index = 0;
        line >> tag >> index;
        if (tag != "class" || index != cls) throw std::runtime_error("model file: bad class line");
        model.labels.classes.push_back(detail::rest_of_line(line));
    }
    if (detail::expect_line(in, "cost header") != "cost")
        throw std::runtime_error("model file: expected cost section");
    Matrix cost(static_cast<std::size_t>(k), static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) {
        std::istringstream line(detail::expect_line(in, "cost row"));
        for (int t = 0; t < k; ++t) {
            std::string token;
            if (!(line >> token)) throw std::runtime_error("model file: short cost row");
            cost(static_cast<std::size_t>(j), static_cast<std::size_t>(t)) =
                detail::parse_double(token, "model cost row " + std::to_string(j + 1));
        }
    }
    model.cost = CostMatrix(k, std::move(cost));

    std::size_t column_count = 0;
    {
        std::istringstream line(detail::expect_line(in, "column count"));
        std::string tag;
        line >> tag >> column_count;
        if (tag != "columns") throw std::runtime_error("model file: expected columns");
    }
    for (std::size_t c = 0; c < column_count; ++c) {
        std::istringstream line(detail::expect_line(in, "column spec"));
        std::string tag;
        line >> tag;
        FeatureEncoder::Source src;
        if (tag == "numeric") {
            std::string impute;
            line >> impute;
            src.kind = ColumnKind::numeric;
            src.impute_value = detail::parse_double(impute, "model numeric column");
            src.name = detail::rest_of_line(line);
        } else if (tag == "categorical") {
            std::size_t ncat = 0, impute_index = 0;
            line >> ncat >> impute_index;
            src.kind = ColumnKind::categorical;
            src.name = detail::rest_of_line(line);
            for (std::size_t i = 0; i < ncat; ++i) {
                const std::string cat_line = detail::expect_line(in, "category");
                if (cat_line.rfind("category ", 0) != 0)
                    throw std::runtime_error("model file: expected category line");
                src.categories.push_back(cat_line.substr(9));
            }
            if (impute_index >= src.categories.size())
                throw std::runtime_error("model file: impute index out of range");
            src.impute_category = src.categories[impute_index];
        } else {
            throw std::runtime_error("model file: unknown column kind '" + tag + "'");
        }
        model.encoder.sources.push_back(std::move(src));
    }

    {
        std::istringstream line(detail::expect_line(in, "standardize flag"));
        std::string tag;
        int flag = 0;
        line >> tag >> flag;
        if (tag != "standardize") throw std::runtime_error("model file: expected standardize");
        model.standardized = flag != 0;
    }
    if (model.standardized) {
        const std::size_t dim = model.encoder.encoded_dim();
        for (std::size_t j = 0; j < dim; ++j) {
            std::istringstream line(detail::expect_line(in, "stats row"));
            std::string tag, mean, sd;
            int scaled = 0;
            line >> tag >> mean >> sd >> scaled;
            if (tag != "stats") throw std::runtime_error("model file: expected stats row");
            model.standardizer.mean.push_back(detail::parse_double(mean, "model stats"));
            model.standardizer.sd.push_back(detail::parse_double(sd, "model stats"));
            model.standardizer.scaled.push_back(scaled != 0);
        }
    }
    model.ensemble = read_ensemble(in, static_cast<int>(model.encoder.encoded_dim()));
    if (model.ensemble.k() != k)
        throw std::runtime_error("model file: ensemble class count mismatch");
    return model;
}

}  // namespace angleboost
