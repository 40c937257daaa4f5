#pragma once

#include <string>
#include <vector>

#include "predlab/csv.hpp"

namespace predlab {

// Line chart straight out of a results table: one polyline per distinct
// value of the series column, points averaged over rows that share an x.
struct PlotSpec {
    std::string x_field;
    std::string y_field;
    std::string series_field;  // empty: a single unnamed series
    std::vector<std::string> guide_fields;  // dashed horizontal reference lines
    bool log_x = false;
    std::string title;
    int width = 880;
    int height = 560;
};

std::string render_plot(const CsvTable& t, const PlotSpec& spec);
void plot_csv_file(const std::string& csv_path, const PlotSpec& spec,
                   const std::string& out_path);

}  // namespace predlab
