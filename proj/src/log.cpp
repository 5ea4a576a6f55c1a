#include "sedformer/log.hpp"

#include <iostream>
#include <utility>

namespace sed {
namespace {

WarningHandler& handler_slot() {
    static WarningHandler handler = [](std::string_view msg) {
        std::cerr << "warning: " << msg << '\n';
    };
    return handler;
}

} // namespace

void warn(std::string_view message) {
    auto& handler = handler_slot();
    if (handler) handler(message);
}

WarningHandler set_warning_handler(WarningHandler handler) {
    return std::exchange(handler_slot(), std::move(handler));
}

WarningCapture::WarningCapture() {
    previous_ = set_warning_handler(
        [this](std::string_view msg) { messages_.emplace_back(msg); });
}

WarningCapture::~WarningCapture() { set_warning_handler(std::move(previous_)); }

bool WarningCapture::contains(std::string_view needle) const {
    for (const auto& m : messages_)
        if (m.find(needle) != std::string::npos) return true;
    return false;
}

} // namespace sed
