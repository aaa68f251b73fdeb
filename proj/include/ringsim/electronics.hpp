#pragma once

namespace ringsim {

struct ReadoutParams {
    double resp = 0.9;   // mA per mW
    double rt = 15000.0;
    double rs = 1.0;
    double bv = 4.0;     // V
    double bc = 0.0;     // mA

    void validate() const;
};

struct WeightBankReadout {
    double thru_power = 0.0; // mW
    double drop_power = 0.0; // mW
};

// Thru port counts positive.
double balanced_current(const WeightBankReadout& readout, double resp);

double amplifier_chain(double c, const ReadoutParams& params);

} // namespace ringsim
