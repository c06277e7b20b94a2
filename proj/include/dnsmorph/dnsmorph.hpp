#pragma once

#include "dnsmorph/bench.hpp"
#include "dnsmorph/bytes.hpp"
#include "dnsmorph/codec.hpp"
#include "dnsmorph/crypto.hpp"
#include "dnsmorph/dns_wire.hpp"
#include "dnsmorph/entropy.hpp"
#include "dnsmorph/errors.hpp"
#include "dnsmorph/framing.hpp"
#include "dnsmorph/ident.hpp"
#include "dnsmorph/inner.hpp"
#include "dnsmorph/reliability.hpp"
#include "dnsmorph/runtime.hpp"
#include "dnsmorph/session.hpp"
#include "dnsmorph/simnet.hpp"
