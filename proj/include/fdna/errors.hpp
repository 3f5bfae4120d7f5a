#pragma once

#include <stdexcept>
#include <string>

namespace fdna {

// Malformed or inconsistent input data (unknown ids, bad files, contract
// violations by the caller). CLI maps this to exit code 3.
struct data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failure (divergence, infeasible solve). CLI maps this to exit
// code 4.
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace fdna
