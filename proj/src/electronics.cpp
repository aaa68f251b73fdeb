#include "ringsim/electronics.hpp"

#include <stdexcept>

namespace ringsim {

void ReadoutParams::validate() const
{
    if (!(resp > 0.0)) throw std::invalid_argument("responsivity must be positive");
    if (!(rt > 0.0)) throw std::invalid_argument("transimpedance gain must be positive");
    if (!(rs > 0.0)) throw std::invalid_argument("source resistance must be positive");
}

double balanced_current(const WeightBankReadout& readout, double resp)
{
    if (readout.thru_power < 0.0 || readout.drop_power < 0.0)
        throw std::invalid_argument("optical powers must be nonnegative");
    return resp * (readout.thru_power - readout.drop_power);
}

double amplifier_chain(double c, const ReadoutParams& params)
{
    params.validate();
    return (params.rt * c + params.bv) / params.rs + params.bc;
}

} // namespace ringsim
