#ifndef DRUT_TESTS_DEVICE_ORACLE_HPP
#define DRUT_TESTS_DEVICE_ORACLE_HPP

#include <cstdint>

#include "drut/device.hpp"

namespace drut::testing {

/// Read-only access to the device's exact amplitudes for test oracles.
class DeviceOracle {
public:
    /// theta-averaged ancilla amplitude after `steps` Trotter steps.
    static Complex finite_l_amplitude(const SimulatedDevice& device, const ShotRequest& request, std::int64_t steps)
    {
        return device.marginal_amplitude(request, steps);
    }

    /// L -> infinity amplitude (effective-Hamiltonian evolution).
    static Complex limit_amplitude(const SimulatedDevice& device, const ShotRequest& request)
    {
        return device.limit_amplitude(request);
    }

    static double probability(const SimulatedDevice& device, Complex amplitude, Basis basis)
    {
        return device.probability_from_amplitude(amplitude, basis);
    }

    static std::int64_t steps(const SimulatedDevice& device, const ShotRequest& request)
    {
        return device.steps_for(request);
    }
};

} // namespace drut::testing

#endif
