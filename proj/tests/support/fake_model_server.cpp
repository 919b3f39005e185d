// Misbehaving protocol peers for client tests. Usage: fake_model_server MODE
//   ok           correct retrieval server
//   bad-version  hello answers version 2
//   non-json     answers garbage after the handshake
//   wrong-count  generate returns one output too few
//   wrong-id     answers with id + 1 after the handshake
//   not-ok       every request after the handshake fails with ok:false
//   no-ok        responses after the handshake lack the ok field
//   hang         never answers after the handshake
//   close        exits right after the handshake

#include <unistd.h>

#include <iostream>
#include <string>

#include "json.hpp"
#include "logicloom/model.hpp"

int main(int argc, char** argv) {
    std::string mode = argc > 1 ? argv[1] : "ok";
    if (mode == "ok") {
        logicloom::RetrievalModel model;
        logicloom::FdChannel channel(::dup(0), ::dup(1));
        logicloom::serve_model(model, channel);
        return 0;
    }
    std::string line;
    bool greeted = false;
    while (std::getline(std::cin, line)) {
        auto req = nlohmann::json::parse(line, nullptr, false);
        if (req.is_discarded()) continue;
        auto id = req.value("id", 0);
        std::string op = req.value("op", "");
        nlohmann::json resp = {{"id", id}, {"ok", true}};
        if (!greeted && op == "hello") {
            greeted = true;
            resp["version"] = mode == "bad-version" ? 2 : 1;
            std::cout << resp.dump() << std::endl;
            continue;
        }
        if (mode == "hang") continue;
        if (mode == "close") return 0;
        if (mode == "non-json") {
            std::cout << "this is not json" << std::endl;
            continue;
        }
        if (mode == "wrong-id") resp["id"] = id + 1;
        if (mode == "not-ok") resp = {{"id", id}, {"ok", false}, {"error", "refused"}};
        if (mode == "no-ok") resp.erase("ok");
        if (op == "generate") {
            auto n = req.at("inputs").size();
            if (mode == "wrong-count" && n > 0) --n;
            resp["outputs"] = nlohmann::json::array();
            for (std::size_t i = 0; i < n; ++i) resp["outputs"].push_back("x");
        }
        if (op == "train") resp["loss"] = 0.0;
        std::cout << resp.dump() << std::endl;
    }
    return 0;
}
