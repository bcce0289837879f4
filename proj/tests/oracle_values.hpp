#pragma once

// Generated by tests/oracles/generate.py; do not edit by hand.

namespace oracle {
inline constexpr double ref_Q_star = 0.3178968499854313;
inline constexpr double ref_q_star = 15.936222655950397;
inline constexpr double ref_Q_map_at_R = 0.3877964592559092;
inline constexpr double mc_e1_sig2_ref = 0.40887645567518766;
inline constexpr double mc_e1_sig2_ref_se = 0.00012897382879653886;
inline constexpr double mc_e2_sig_sig_ref_c05_mu2 = 0.5152810918671507;
inline constexpr double mc_e2_sig_sig_ref_c05_mu2_se = 0.0001251255592386881;
inline constexpr double e2_sig_sig_ref_c05_mu2 = 0.5151422522515534;
inline constexpr double ref_chi_1 = 0.9987795054968508;
inline constexpr double mu2_Q_star = 0.2571779163288845;
inline constexpr double mu2_c_map_c03_S05 = 0.274945212366415;
inline constexpr double ref_mu1 = 0.40866195819070994;
inline constexpr double ref_var1 = 0.16634585542128333;
inline constexpr double ref_mu2 = 0.5901175473061407;
inline constexpr double ref_var2 = 0.14315628730138752;
inline constexpr double ref_xi_Q_slope_closed_form = 0.33171178741968016;
inline constexpr double ref_xi_Q_slope = 0.4974227640341944;
inline constexpr double ref_xi_Q = 1.43201853734399;
inline constexpr double vanilla_q_map_1 = 0.8877876033951428;
inline constexpr double mc_vanilla_q_map_1 = 0.8874205559720075;
inline constexpr double mc_vanilla_q_map_1_se = 0.00022218594900459888;
inline constexpr double vanilla_q_star_sw15 = 0.7946149573560785;
inline constexpr double vanilla_c_map_sw15_c05_S03 = 0.4775189492404377;
inline constexpr double vanilla_chi_sw15_c05 = 0.9803010638035455;
inline constexpr double vanilla_critical_sigma_w2 = 1.1608847204628852;
inline constexpr double critinit_q16_Q_star = 0.3180986325657948;
inline constexpr double critinit_q16_sigma_w2 = 47.49551752338772;
inline constexpr double critinit_q16_sigma_v2 = 1.9385670060991769;
}  // namespace oracle
