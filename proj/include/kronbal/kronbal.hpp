#pragma once

#include "kronbal/balance.hpp"
#include "kronbal/diagnostics.hpp"
#include "kronbal/energy.hpp"
#include "kronbal/errors.hpp"
#include "kronbal/io.hpp"
#include "kronbal/kron.hpp"
#include "kronbal/model.hpp"
