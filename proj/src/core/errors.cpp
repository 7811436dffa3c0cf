#include <sstream>

#include "gmdkit/types.hpp"

namespace gmdkit {

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

std::string shape_string(Index rows, Index cols) {
    std::ostringstream out;
    out << rows << "x" << cols;
    return out.str();
}

const Vector& TwoWayDataset::response() const {
    if (!y) fail(ErrorCode::invalid_argument, "dataset has no response vector y");
    return *y;
}

}  // namespace gmdkit
