#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace sosflow::cli {

// Exit codes shared by every subcommand.
enum ExitCode : int {
  kOk = 0,
  kFailure = 1,      // numerical or otherwise unclassified error
  kConfig = 2,       // bad flags, config parse or validation error
  kIo = 3,           // unreadable/unwritable files, empty or malformed data
  kMismatch = 4,     // data does not fit the model
  kUnsupported = 5,  // operation not available for this model
};

// Runs `sosflow <args...>`; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

// Hex SHA-1 of "blob <size>\0<bytes>", as computed by `git hash-object`.
std::string git_blob_hash(const std::string& bytes);

}  // namespace sosflow::cli
