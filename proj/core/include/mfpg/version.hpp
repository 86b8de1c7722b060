#pragma once

#define MFPG_VERSION "1.0.0"
