// Writes the synthetic fixture set (media, mock table, config, datasets).
//   make_fixtures OUT_DIR

#include <iostream>

#include "groundchat/error.hpp"
#include "groundchat/fixtures.hpp"

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: make_fixtures OUT_DIR\n";
        return 2;
    }
    try {
        const auto paths = groundchat::fixtures::write_fixtures(groundchat::fixtures::make_fixtures(), argv[1]);
        std::cout << paths.root.string() << '\n';
    } catch (const std::exception& e) {
        std::cerr << "make_fixtures: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
