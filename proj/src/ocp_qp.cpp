#include "coopdock/ocp_qp.hpp"

namespace coopdock::qp {

// The controller's QP dimensions: 12 joint states plus the 8 previous inputs,
// 8 inputs plus one collision slack.
template class OcpQpSolver<20, 9>;

}  // namespace coopdock::qp
