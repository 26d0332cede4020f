// Copyright 2026 The trajattn Authors
// SPDX-License-Identifier: Apache-2.0

// Reference values computed once with numpy (float64) from the literal inputs
// below, then frozen.

#pragma once

#include <vector>

namespace frozen {

// 2x2 product.
inline const std::vector<double> kMatA = {
    0.0, 0.3, -0.27, -0.89
};
inline const std::vector<double> kMatB = {
    -0.45, -0.99, 0.06, 1.34
};
inline const std::vector<double> kMatAB = {
    0.018, 0.402, 0.06810000000000001, -0.9253
};

// Layer norm of one row, eps 1e-5, unit gain, zero bias.
inline const std::vector<double> kLnX = {
    -0.49, -0.62, 0.49, 0.36, 0.11
};
inline const std::vector<double> kLnOut = {
    -1.0276411408261692, -1.3180614632335648, 1.1616812896295827, 0.8712609672221868,
    0.31276034720796453
};

// Joint attention, N=4, D=3, scale 1/sqrt(3).
inline const std::vector<double> kJointQ = {
    -0.93, -0.03, 0.7, -1.34, -0.46, -1.9, -1.29, -1.84, -0.24, -1.27, 0.27, 0.16
};
inline const std::vector<double> kJointK = {
    -0.19, -2.52, -0.54, -0.05, 0.11, -1.53, -0.48, -0.98, -0.81, 1.06, -0.81, -0.03
};
inline const std::vector<double> kJointV = {
    0.88, -0.58, -0.11, 0.11, 0.06, -1.23, 0.08, 1.36, -1.55, 0.86, 0.12, -0.64
};
inline const std::vector<double> kJointOut = {
    0.48120183404035277, 0.2841807103132306, -0.8722592688875427, 0.3447482417327754,
    0.2896446091411165, -0.9942169592353993, 0.6975780833771767, -0.16579135452333502,
    -0.44758818769867353, 0.37247466381303984, 0.3808690269248124, -1.009719930722173
};

// S=2, T=2, D=2 grid, scale 1/sqrt(2).
inline const std::vector<double> kGridQ = {
    2.0, 0.76, -1.2, 0.07, 0.58, -0.19, 0.68, -0.07
};
inline const std::vector<double> kGridK = {
    0.67, 1.44, -0.68, 0.2, -0.46, 0.13, -1.19, -0.58
};
inline const std::vector<double> kGridV = {
    -0.2, 0.9, 1.15, -1.32, -0.79, 0.65, -1.99, -0.46
};
inline const std::vector<double> kDividedSpace = {
    -0.10451771374191207, 0.7429846848200332, 0.8088224741224889, -0.7589525130014263,
    -1.3290112710772566, 0.15141457425353763, -1.2960206872043138, 0.18193086433600963
};
inline const std::vector<double> kDividedTime = {
    -0.253662127148527, 0.8772618105302852, -0.7254568103186203, -0.8063398544987219,
    -0.4528922784584255, 0.7928422548904978, -0.25838052610919693, -0.9342652062248697
};
inline const std::vector<double> kStage1Maps = {
    0.9292723805495645, 0.07072761945043551, 0.8043851811334486, 0.19561481886655133,
    0.2527240932426008, 0.7472759067573992, 0.3579478252315768, 0.6420521747684231,
    0.5955772236164997, 0.4044227763835004, 0.5508239407689528, 0.4491760592310472,
    0.642848072004449, 0.35715192799555096, 0.578316093996405, 0.42168390600359495
};
inline const std::vector<double> kStage1Tokens = {
    -0.10451771374191207, 0.7429846848200332, -1.0247377826398616, 0.432867551058128,
    0.8088224741224889, -0.7589525130014263, -1.5604626097221077, -0.06267791399294971,
    0.3459707481177255, 0.0021814364286292325, -1.3290112710772566, 0.15141457425353763,
    0.28215510279399375, 0.10712271984987683, -1.2960206872043138, 0.18193086433600963
};

// Full trajectory pipeline on raw tokens z [4, 2]; each W acts as x W^T.
inline const std::vector<double> kPipeZ = {
    -0.1, 1.26, 0.69, -0.33, -0.37, -0.25, 1.52, -0.43
};
inline const std::vector<double> kPipeWq = {
    -0.3, 0.35, -0.12, -0.2
};
inline const std::vector<double> kPipeWk = {
    -1.11, -0.01, -0.44, 1.17
};
inline const std::vector<double> kPipeWv = {
    0.65, -0.02, 0.67, -0.34
};
inline const std::vector<double> kPipeWq2 = {
    1.05, -0.01, 0.58, -1.29
};
inline const std::vector<double> kPipeWk2 = {
    0.35, -1.69, -2.04, -0.3
};
inline const std::vector<double> kPipeWv2 = {
    -0.9, 0.16, 2.24, -0.83
};
inline const std::vector<double> kPipeOut = {
    -0.156787107581807, 0.3069481131747011, -0.2665650166352588, 0.5073716711150267,
    -0.1910939652736426, 0.37765677233534284, -0.3330748547583517, 0.6166813209215471
};

// Both stages, S=2, T=3, D=2, identity second-stage projections, scale 1/sqrt(2).
inline const std::vector<double> kS2Q = {
    -0.62, 0.21, 0.49, -0.18, -0.21, 0.7, 0.52, -1.03, -0.08, 0.04, -1.05, 0.26
};
inline const std::vector<double> kS2K = {
    -0.86, 0.97, 0.19, 0.09, -0.59, -0.12, -2.0, -1.13, 0.36, -2.13, 0.85, -1.75
};
inline const std::vector<double> kS2V = {
    0.76, -0.85, 0.78, 0.13, -1.54, 1.25, 1.44, -0.07, -0.27, -0.16, -0.98, 1.1
};
inline const std::vector<double> kS2Out = {
    0.3811622158584032, -0.05953347279735005, 0.19413502167095892, 0.1553869319844473,
    -0.22242380053817265, 0.3885451107920645, 0.07161876582131756, 0.29664737589012746,
    -0.14310612652911206, 0.346064750735182, 0.05672071788185815, 0.1542647549459493
};

// 8x8 row-softmax of these logits; 2-norm condition number 30.1. kPinv is
// numpy.linalg.pinv, kPinvIter6 the six-step iteration in numpy.
inline const std::vector<double> kPinvLogits = {
    1.31, 0.04, -1.17, 0.01, -1.56, 1.79, -1.52, 0.48, 0.54, -1.45, 0.3, 1.0, 0.47, 0.26, 0.95,
    0.16, 0.34, -0.13, 0.63, -0.94, 0.79, -0.51, -1.09, 0.37, 1.69, 0.96, -0.52, 0.7, -0.45,
    -0.12, 0.09, -2.32, 0.19, -1.03, -0.7, -1.47, -1.52, -0.94, 0.83, 1.67, -0.03, 1.09, -0.26,
    -1.91, 0.15, 0.45, -0.43, 0.3, 0.57, -0.86, -1.48, -0.22, -0.21, -0.35, 0.99, 1.73, -0.42,
    0.7, 0.94, 0.71, 1.05, -0.39, 0.74, 2.02
};
inline const std::vector<double> kPinv = {
    0.24045794006110746, -1.3485459906248638, 1.6978815056097794, 2.1235060284577902,
    0.3147976454553921, -1.4292583950972948, 1.2053322997977098, -1.804171033659615,
    -0.879835774334979, -0.481775021925232, -1.8813169374392948, 0.9936834201657185,
    0.3343583511531071, 3.1048239438103695, -1.5893123235366267, 1.3993743421069385,
    0.33437439462688856, 2.5309122652667, 1.8445682321217194, 0.3175186894610813,
    12.930621128493465, -0.8779566345689912, -16.724890565982143, 0.6448524905812815,
    0.60007508186963, 1.1959982326151342, -3.869763926168215, 1.7468228301117081,
    -3.752857699463389, -2.0144430661668893, -0.2519564064018229, 7.346124953603842,
    -0.8931161226959005, -1.036088946760673, 3.2829788004091305, -1.7721398106493904,
    -11.03451577769861, 0.7809542068791192, 13.620507434968804, -1.9485797844524801,
    2.184948627459651, 0.954852005689854, -0.14038424994024928, -1.7446274606529977,
    0.06474979747750723, 0.8738440200372969, -0.3054022771881513, -0.8879804628829109,
    -1.6767502046252634, 4.245314124422923, 0.45391866775611306, -1.6463484113096278,
    3.9387036250043685, 2.7800545899947853, -0.4089415114182698, -6.685950879825032,
    0.5471348047286985, -1.8093035061154787, -0.5858090730900559, 0.25653836575438105,
    -0.41326603319506183, -1.010635341345786, 1.0450119832203821, 2.970328800042923
};
inline const std::vector<double> kPinvIter6 = {
    0.25174539461475237, -1.313961866212093, 1.6800963856136002, 2.1443801333469814,
    0.5372512412189107, -1.444065131646767, 0.9149580621574477, -1.76835192054384,
    -0.8964862758996324, -0.5433289533341719, -1.8579036939980267, 0.9628312668451527,
    -0.04448911259549161, 3.124820271214393, -1.1048993736254886, 1.3559447970717342,
    0.14871376753447044, 1.5041424126932006, 2.0144721191074306, -0.02843746425262243,
    7.0685145871450645, -0.7146098376212778, -9.512092018606523, 0.4645217644780845,
    0.5873948635676176, 1.3182402495344123, -3.806645055038737, 1.724291608939622,
    -3.2277211869698808, -1.9695946596462293, -0.7829391952143907, 7.162061911043141,
    -0.7288227181176348, -0.1953960574948311, 3.11444312622078, -1.466386077809176,
    -6.173780913970755, 0.6245128248865218, 7.5991573687908405, -1.7283736974685495,
    2.1855466199887403, 0.933877232395858, -0.1474338234516955, -1.7436516373463606,
    -0.03319164932105381, 0.8690650380911107, -0.1994289606840058, -0.8657209223131191,
    -1.676727723324996, 4.06430695514776, 0.4053931707458122, -1.6473393476068388,
    3.0679701552442213, 2.7483105558681755, 0.5539943374967422, -6.524215283515732,
    0.547386641578734, -1.7391357511053294, -0.5676223632039255, 0.2573997926718871,
    -0.07443039603863522, -0.9988113237304683, 0.6692732000490627, 2.9091712231056777
};

}  // namespace frozen
