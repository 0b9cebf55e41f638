#ifndef BOXFORGE_TOOLS_CLI_H_
#define BOXFORGE_TOOLS_CLI_H_

#include <iosfwd>
#include <string>
#include <vector>

namespace boxforge::tools {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;

// Runs the boxforge command line. args[0] is the program name.
// Returns 0 on success, 1 on usage/validation errors, 2 on I/O errors.
int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err);

}  // namespace boxforge::tools

#endif  // BOXFORGE_TOOLS_CLI_H_
