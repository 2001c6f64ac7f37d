#include "cascadefit/errors.hpp"

#include <fmt/format.h>

namespace cascadefit {

StiffnessError::StiffnessError(std::string compartment, double time, double value)
    : IntegrationError(fmt::format("integration became unstable: compartment {} reached {} at t={}h",
                                   compartment, value, time)),
      compartment_(std::move(compartment)), time_(time), value_(value)
{
}

DivergenceError::DivergenceError(double time)
    : IntegrationError(fmt::format("integration diverged (non-finite state) at t={}h", time)), time_(time)
{
}

ParseError::ParseError(std::size_t line, const std::string& reason)
    : Error(fmt::format("line {}: {}", line, reason)), line_(line)
{
}

DuplicateIdError::DuplicateIdError(std::string id)
    : Error(fmt::format("duplicate event id '{}'", id)), id_(std::move(id))
{
}

namespace {
std::string skew_message(const std::vector<std::string>& offenders)
{
    std::string msg = "events precede their cascade root:";
    for (const auto& id : offenders) {
        msg += ' ';
        msg += id;
    }
    return msg;
}
} // namespace

ClockSkewError::ClockSkewError(std::vector<std::string> offenders)
    : Error(skew_message(offenders)), offenders_(std::move(offenders))
{
}

} // namespace cascadefit
