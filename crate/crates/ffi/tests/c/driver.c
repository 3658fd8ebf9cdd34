#include <stdio.h>
#include <string.h>
#include "solharden.h"

static const char *SRC =
    "contract Faucet {\n"
    "  mapping(address => bool) claimed;\n"
    "  function claim() public {\n"
    "    require(claimed[msg.sender] == false);\n"
    "    msg.sender.transfer(1);\n"
    "    claimed[msg.sender] = true;\n"
    "  }\n"
    "}\n";

int main(void) {
    SolhardenSession *s = solharden_session_new();
    if (solharden_harden(s, SRC, "faucet.msol") != SOLHARDEN_STATUS_OK) return 1;
    const char *out = solharden_hardened_source(s);
    if (out == NULL || strstr(out, "_hcc_lock_claimed") == NULL) return 2;
    if (solharden_harden(s, "contract {", "bad.msol") != SOLHARDEN_STATUS_SYNTAX) return 3;
    if (solharden_last_error(s) == NULL || solharden_hardened_source(s) != NULL) return 4;
    printf("%s\n", solharden_version());
    solharden_session_free(s);
    return 0;
}
