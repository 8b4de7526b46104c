#pragma once

#include <string>
#include <string_view>

namespace bipolar {

std::string sha1_hex(std::string_view data);
std::string sha256_hex(std::string_view data);

/// Content hash in the form git uses for blobs: sha1("blob <len>\0" + data).
std::string git_blob_hash(std::string_view data);

}  // namespace bipolar
