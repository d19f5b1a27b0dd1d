// Regenerates the model files under data/zoo from the builders in bench.hpp.
#include <iostream>

#include "ltlfplan/bench.hpp"

int main(int argc, char** argv) {
    std::string dir = argc > 1 ? argv[1] : "data/zoo";
    ltlfplan::bench::Zoo zoo = ltlfplan::bench::build_zoo();
    ltlfplan::bench::save_zoo(zoo, dir);
    for (const auto& e : zoo.entries)
        std::cout << e.name << " -> " << dir << "/" << e.name << ".json\n";
    return 0;
}
